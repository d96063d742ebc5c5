from typing import List, Optional, Sequence

# Exit statuses understood by the CLI
EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class StableMildError(Exception):
    exit_code = EXIT_RUNTIME_ERROR

    def __init__(self, msg: str = "") -> None:
        super(StableMildError, self).__init__(msg)
        self.msg = msg

    def __str__(self) -> str:
        return self.msg


class ParameterError(StableMildError, ValueError):
    exit_code = EXIT_CONFIG_ERROR


class CoefficientError(ParameterError):
    pass


class JumpBudgetError(ParameterError):

    def __init__(self, expected: float, budget: float) -> None:
        super(JumpBudgetError, self).__init__(
            "Expected sub-R jump count {:.4g} exceeds the budget of {:.4g}; raise epsilon.".format(expected, budget)
        )
        self.expected = expected
        self.budget = budget


class ConfigError(StableMildError):
    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, msg: str = "", field: Optional[str] = None, line: Optional[int] = None) -> None:
        super(ConfigError, self).__init__(msg)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        location = ""
        if self.line is not None:
            location += "line {}: ".format(self.line)

        if self.field is not None:
            location += "{}: ".format(self.field)

        return "{}{}".format(location, self.msg)


class SimulationError(StableMildError):
    exit_code = EXIT_RUNTIME_ERROR


class StateOverflowError(SimulationError):

    def __init__(self, step: int, value: float) -> None:
        super(StateOverflowError, self).__init__(
            "Solution state left the finite range at step {} (value {!r}).".format(step, value)
        )
        self.step = step
        self.value = value


class PicardDivergenceError(SimulationError):

    def __init__(self, history: Sequence[float], max_iter: int) -> None:
        super(PicardDivergenceError, self).__init__(
            "Picard iteration did not converge after {} iterations (last distance {!r}).".format(
                max_iter, history[-1] if len(history) > 0 else float("nan")
            )
        )
        self.history: List[float] = list(history)


class OverflowBudgetError(SimulationError):
    pass


class GammaSearchError(SimulationError):
    pass


class BoundsError(StableMildError):
    exit_code = EXIT_RUNTIME_ERROR


class CommandError(StableMildError):
    exit_code = EXIT_CONFIG_ERROR


class CommandArgumentError(CommandError):
    pass


class CommandDependencyError(CommandError):

    def __str__(self) -> str:
        return "Command Dependency Error: {}".format(self.msg)
