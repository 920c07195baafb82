'''
Exceptions raised by daplace.

Validation problems derive from ValueError, numerical failures from NumericalError, so callers
(and the CLI exit codes) can separate bad input from solver breakdown.
'''

from typing import Optional

import numpy as np


class DaplaceError(Exception):
    '''Base class of every daplace exception.'''


class ValidationError(DaplaceError, ValueError):
    pass


class InvalidDimensionError(ValidationError):
    pass


class OutOfDomainError(ValidationError):
    pass


class DuplicateSensorError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class TooAmbiguousError(ValidationError):
    pass


class ConfigError(ValidationError):
    '''
    Raised while reading or validating an experiment configuration. ``line`` is set for parse
    errors, ``field`` for validation errors.
    '''

    def __init__(self, message: str, line: Optional[int]=None, field: Optional[str]=None):
        if line is not None:
            message = f'line {line}: {message}'
        if field is not None:
            message = f'{field}: {message}'
        super().__init__(message)
        self.line = line
        self.field = field


class NumericalError(DaplaceError, RuntimeError):
    pass


class NewtonConvergenceError(NumericalError):

    def __init__(self, step: int, residual: float):
        super().__init__(f'Newton did not converge at time step {step}, residual {residual:.3e}')
        self.step = step
        self.residual = residual


class StalledSearchError(NumericalError):

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


class LineSearchError(NumericalError):
    pass


class AdjointSolverError(NumericalError):

    def __init__(self, residual: float, applications: int):
        super().__init__(f'coupled adjoint solve stopped after {applications} operator applications '
                         f'with relative residual {residual:.3e}')
        self.residual = residual
        self.applications = applications
