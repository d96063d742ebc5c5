import importlib
import logging
import os
import sys
from typing import Any, Callable, List, Optional

from stablemild.errors import CommandError
from stablemild.framework.args.model import ArgumentDefinition
from stablemild.framework.command import CommandRegistry, CommandWrapper

_LOG = logging.getLogger(__name__)

_PYTHON_SRC_CODE_EXT = ".py"
_IGNORE_LIST = ("__pycache__", "__init__.py")
_PYTHON_MODULE_INIT_FILE = "__init__.py"


def _is_python_src_file(filename: str) -> bool:
    return filename.endswith(_PYTHON_SRC_CODE_EXT)


def _is_relative(module: str) -> bool:
    return module.startswith(".")


def command(
    name: Optional[str] = None,
    help: Optional[str] = None,
    arguments: Optional[List[ArgumentDefinition]] = None,
) -> Callable[[Callable[..., Any]], CommandWrapper]:
    """
    Marks a function as a subcommand. The function is replaced by its CommandWrapper, which scan() picks up from
    the module namespace.
    """

    def _factory(target_func: Callable[..., Any]) -> CommandWrapper:
        return CommandWrapper(target_func, name, help, arguments)

    return _factory


def dispatch(
    module: str,
    package: Optional[str] = None,
    argv: Optional[List[str]] = None,
    help: Optional[str] = None,
    handle_exceptions: bool = False,
) -> int:
    if _is_relative(module) is True and package is None:
        raise CommandError(
            "Attempting an import of a relative module requires the package argument to be specified."
        )

    if argv is None:
        argv = sys.argv

    registry = scan(os.path.basename(argv[0]), module, package, help)
    return registry.dispatch(argv, handle_exceptions=handle_exceptions)


def scan(cli_call_name: str, module: str, package: Optional[str], help: Optional[str]) -> CommandRegistry:
    """
    Imports every submodule directly below module and registers the command components found in them.
    """
    root_module = importlib.import_module(module, package=package)
    root_path = root_module.__file__
    if root_path is None:
        raise CommandError("Module {} has no file location to scan".format(module))

    _LOG.debug("Scanning module %s starting at file path: %s", module, root_path)

    target_module = module
    if _is_relative(target_module):
        if package is None:
            raise CommandError("Package was not specified but the module is relative.")

        target_module = package

    search_path = root_path
    if search_path.endswith(_PYTHON_MODULE_INIT_FILE):
        search_path = os.path.dirname(root_path)

    submodule_names = list()
    if os.path.isdir(search_path):
        # Sorted so registration order does not depend on the file system
        for filename in sorted(os.listdir(search_path)):
            if filename in _IGNORE_LIST:
                continue

            abs_path = os.path.join(search_path, filename)
            init_path = os.path.join(abs_path, _PYTHON_MODULE_INIT_FILE)

            if os.path.isdir(abs_path) and os.path.exists(init_path):
                module_name = ".".join((target_module, filename))
            elif _is_python_src_file(filename):
                module_name = ".".join((target_module, os.path.splitext(filename)[0]))
            else:
                continue

            _LOG.debug("Adding module %s to the scan list.", module_name)
            submodule_names.append(module_name)

    submodules = [importlib.import_module(n) for n in submodule_names]
    submodules.append(root_module)

    registry = CommandRegistry(cli_call_name, help=help)
    for submodule in submodules:
        for component_name in dir(submodule):
            component = getattr(submodule, component_name)
            if isinstance(component, CommandWrapper):
                _LOG.debug("Found command component: %s", component)
                registry.insert(component)

    return registry
