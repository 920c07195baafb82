'''
Smoothed absolute value nonlinearity g(y) = y / sqrt(y^2 + eps^2) and its derivatives.
'''

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Nonlinearity:
    '''
    Monotone, bounded (|g| <= 1) reaction term with g(0) = 0.
    '''
    eps_reg: float = 0.1

    def value(self, y: np.ndarray) -> np.ndarray:
        return y / np.sqrt(y**2 + self.eps_reg**2)

    def derivative(self, y: np.ndarray) -> np.ndarray:
        return self.eps_reg**2 / (y**2 + self.eps_reg**2)**1.5

    def second_derivative(self, y: np.ndarray) -> np.ndarray:
        return -3.0 * self.eps_reg**2 * y / (y**2 + self.eps_reg**2)**2.5


def g_value_derivs(nl: Nonlinearity, y):
    '''returns (g, g', g'') evaluated at y'''
    return nl.value(y), nl.derivative(y), nl.second_derivative(y)
