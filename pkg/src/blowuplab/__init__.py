# blowuplab: blow-up curves of the radial semilinear wave equation

__version__ = "0.1.0"
