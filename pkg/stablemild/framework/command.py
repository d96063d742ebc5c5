import inspect
import logging
from typing import Any, Callable, Dict, Iterator, List, Optional

from stablemild.errors import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    CommandArgumentError,
    CommandDependencyError,
    CommandError,
    StableMildError,
)
from stablemild.framework.args import Argument, ArgumentDefinition, Flag
from stablemild.framework.formatting import format_one_column_output, format_two_column_output

_LOG = logging.getLogger(__name__)

_PRINT_HELP = "PRINT_HELP"

_ARG_SWITCH_CHAR = "-"
_HELP_ARGUMENTS = ("-h", "-?", "--help")
_VERBOSE_ARGUMENTS = ("-v", "--verbose")
_LAST_DEFAULT_ITR_VALUE = "LAST_DEFAULT_ITER"


class CommandWrapper(object):

    def __init__(
        self,
        func: Callable[..., Any],
        name: Optional[str] = None,
        help: Optional[str] = None,
        arguments: Optional[List[ArgumentDefinition]] = None,
    ) -> None:
        self.func = func
        self.argdefs: List[ArgumentDefinition] = list()
        self._func_argspec = inspect.getfullargspec(self.func)

        # If there's no name specified then use the name of the function instead
        self.name: str = name if name is not None else self.func.__name__.replace("_", "-")

        # Docstrings stand in for missing help
        self.help: str = ""
        if help is not None:
            self.help = help
        elif self.func.__doc__ is not None:
            self.help = inspect.cleandoc(self.func.__doc__)

        if arguments is not None:
            self.argdefs.extend(arguments)

        self._process_arg_defs()

    def _process_arg_defs(self) -> None:
        # Argument definitions answer the function keywords from the right
        arg_kw_iter: Iterator[str] = reversed(self._func_argspec.args)

        arg_default_iter: Iterator[Any] = iter(list())
        if self._func_argspec.defaults is not None:
            arg_default_iter = reversed(self._func_argspec.defaults)

        for arg_def in reversed(self.argdefs):
            if arg_def.short_form in _HELP_ARGUMENTS or arg_def.long_form in _HELP_ARGUMENTS:
                raise CommandArgumentError("Arguments may not carry the signature of: {}".format(_HELP_ARGUMENTS))

            try:
                arg_def.keyword = next(arg_kw_iter)
            except StopIteration:
                raise CommandArgumentError(
                    "CLI argument {} defined but function {} has no answering argument.".format(
                        arg_def, self.func.__name__
                    )
                ) from None

            next_default = next(arg_default_iter, _LAST_DEFAULT_ITR_VALUE)
            if next_default is not _LAST_DEFAULT_ITR_VALUE:
                arg_def.set_default(next_default)

            if arg_def.has_default is False and isinstance(arg_def, Flag):
                arg_def.set_default(False)

        for arg_def in self.argdefs:
            arg_def.check()

    def print_help(self) -> None:
        if len(self.argdefs) == 0:
            print("This command has no arguments specified.")
            return

        for argdef in self.argdefs:
            print(format_two_column_output(str(argdef), argdef.help))

    def __call__(self, argv: List[str]) -> Any:
        for arg in argv:
            if arg in _HELP_ARGUMENTS:
                return _PRINT_HELP

        # Command errors are shown to the user without a stacktrace
        try:
            kwargs = ArgumentMapper(self.argdefs).map_to_kwargs(argv)
        except CommandError as ce:
            print("{}\n".format(ce))
            raise

        required_arguments = [a for a in self.argdefs if a.has_default is False and a.keyword not in kwargs]
        if len(required_arguments) > 0:
            for arg_def in required_arguments:
                print("Argument required but not set: {}".format(arg_def))

            print("")
            raise CommandArgumentError("Missing required arguments")

        return self.func(**kwargs)

    def __repr__(self) -> str:
        return self.name

    def __str__(self) -> str:
        return self.name


class CommandRegistry(object):
    """Flat table of subcommands keyed by name."""

    def __init__(self, cli_call_name: str, help: Optional[str] = None) -> None:
        self.cli_call_name = cli_call_name
        self.help = "" if help is None else help
        self.commands: Dict[str, CommandWrapper] = dict()

    def insert(self, command: CommandWrapper) -> None:
        existing = self.commands.get(command.name)
        if existing is not None and existing is not command:
            raise CommandDependencyError("Command {} is defined twice".format(command.name))

        self.commands[command.name] = command

    def get(self, name: str) -> Optional[CommandWrapper]:
        return self.commands.get(name)

    def dispatch(self, argv: List[str], handle_exceptions: bool = False) -> int:
        """
        Runs the subcommand named by argv[1] and returns the process exit status.

        :param argv:
        :return: EXIT_OK unless the command reported otherwise or failed
        """
        if len(argv) <= 1 or argv[1] in _HELP_ARGUMENTS:
            self.print_help()
            return EXIT_OK

        args_list = [arg for arg in argv[2:] if arg not in _VERBOSE_ARGUMENTS]
        if len(args_list) != len(argv) - 2:
            logging.getLogger().setLevel(logging.DEBUG)

        command = self.get(argv[1])
        if command is None:
            print("Unknown command: {}\n".format(" ".join(argv[1:])))
            self.print_help()
            return EXIT_CONFIG_ERROR

        try:
            result = command(args_list)
        except CommandError:
            self.print_command_help(command)
            return EXIT_CONFIG_ERROR
        except StableMildError as e:
            print("ERROR: {}".format(e))
            return e.exit_code
        except (Exception, KeyboardInterrupt):
            if not handle_exceptions:
                raise

            _LOG.exception("Command %s failed", command)
            return EXIT_RUNTIME_ERROR

        if result == _PRINT_HELP:
            self.print_command_help(command)
            return EXIT_OK

        return EXIT_OK if result is None else int(result)

    def print_command_help(self, command: CommandWrapper) -> None:
        print("Usage: {} {} [options]\n".format(self.cli_call_name, command.name))

        if len(command.help) > 0:
            print("{}\n".format(format_one_column_output(command.help)))

        command.print_help()

    def print_help(self) -> None:
        print("Usage: {} <command> [options]\n".format(self.cli_call_name))

        if len(self.help) > 0:
            print("{}\n".format(format_one_column_output(self.help)))

        output = "Available Commands:\n"
        for name in sorted(self.commands):
            summary = self.commands[name].help.split("\n\n")[0]
            output += "{}\n".format(format_two_column_output(name, summary))

        print(output)


class ArgumentIterator(object):

    def __init__(self, argv: List[str]) -> None:
        self._idx = 0
        self._argv = argv

    def advance(self, steps: int = 1) -> None:
        self._idx += steps

    def get(self) -> str:
        return self._argv[self._idx]

    @property
    def empty(self) -> bool:
        return self._idx >= len(self._argv)


class ArgumentMapper(object):

    def __init__(self, argdefs: List[ArgumentDefinition]) -> None:
        self.argdefs = argdefs

    def _match_arg(self, arg: str) -> Optional[ArgumentDefinition]:
        for argdef in self.argdefs:
            if argdef.matches(arg):
                return argdef
        return None

    def map_to_kwargs(self, argv: List[str]) -> Dict[str, Any]:
        arg_source = ArgumentIterator(argv)

        # Function argument defaults beat out our typing
        kwargs: Dict[str, Any] = {a.keyword: a.default for a in self.argdefs if a.has_default}

        while arg_source.empty is False:
            arg = arg_source.get()

            # Accept --name=value as well as --name value
            value: Optional[str] = None
            if arg.startswith(_ARG_SWITCH_CHAR) and "=" in arg:
                arg, value = arg.split("=", 1)

            argdef = self._match_arg(arg)
            if argdef is None:
                raise CommandError("Unknown argument: {}".format(arg))

            arg_source.advance()
            if isinstance(argdef, Flag):
                if value is not None:
                    raise CommandError("Flag {} takes no value".format(argdef.forms()))

                kwargs[argdef.keyword] = True

            elif isinstance(argdef, Argument):
                if value is None:
                    if arg_source.empty:
                        raise CommandError("Argument {} requires a value".format(argdef.forms()))

                    value = arg_source.get()
                    arg_source.advance()

                kwargs[argdef.keyword] = argdef.convert(value)

        return kwargs
