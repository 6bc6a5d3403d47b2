"""Combinatorial p-modulus on finite covers and conformal dimension of Lattès maps."""

from .geometry import IntMatrix2, InputError, NotExpandingError, classify, confdim_oracle
from .cover import grid_cover, subdivision_cover, net_cover, self_cover_map
from .curves import Connector, Explicit, ThroughPiece, TorusLoop, realize
from .modulus import AdmissibleMetric, ModulusResult, modulus_of, solve, verify_beurling

__version__ = "0.1.0"
