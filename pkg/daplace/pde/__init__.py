from daplace.pde.nonlinearity import Nonlinearity, g_value_derivs
from daplace.pde.solvers import ParabolicModel, SolveCounter
