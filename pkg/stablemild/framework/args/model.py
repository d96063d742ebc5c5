from typing import Any, Callable, Optional

from stablemild.errors import CommandArgumentError, CommandError

Converter = Callable[[str], Any]


class ArgumentDefinition(object):

    def __init__(
        self,
        short_form: Optional[str] = None,
        long_form: Optional[str] = None,
        name: Optional[str] = None,
        help: Optional[str] = None,
        type: Converter = str,
    ) -> None:
        self.short_form = short_form
        self.long_form = long_form
        self.name = name
        self.help = help
        self.type = type
        self.keyword: str = ""
        self.default: Optional[Any] = None
        self.has_default = False

    def set_default(self, value: Any) -> None:
        self.default = value
        self.has_default = True

    def check(self) -> None:
        if self.short_form is None and self.long_form is None:
            raise CommandArgumentError("No valid CLI form specified for argument: {}".format(self.keyword))

    def forms(self) -> str:
        """
        Returns a formatted string with the matchable forms for the argument
        :return:
        """
        return ", ".join(form for form in (self.short_form, self.long_form) if form is not None)

    def matches(self, arg: str) -> bool:
        return arg in (self.short_form, self.long_form)

    def convert(self, raw: str) -> Any:
        try:
            return self.type(raw)
        except (TypeError, ValueError):
            raise CommandError(
                "Argument {} expects {}, got {!r}".format(self.forms(), getattr(self.type, "__name__", "a value"), raw)
            ) from None

    def __str__(self) -> str:
        if self.name is not None:
            return "{} <{}>".format(self.forms(), self.name)
        return self.forms()


class Argument(ArgumentDefinition):
    pass


class Flag(ArgumentDefinition):

    def __str__(self) -> str:
        return self.forms()
