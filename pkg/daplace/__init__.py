'''
daplace: optimal placement of sensors and observation windows for 4D-VAR data assimilation of a
semilinear parabolic model, posed as a bilevel optimization problem.
'''

__version__ = '0.1.0'
