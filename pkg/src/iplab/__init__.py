"""Simulation and verification laboratory for the complete-graph
inclusion process and its measure-valued scaling limits."""

__version__ = "0.1.0"

from .kernel import DEFAULT_BACKEND, HAVE_COMPILED, make_kernel
from .observables import ANY, MACRO, MESO, DomainMismatch, Observable
from .states import (Configuration, DiscreteMeasure, DoesNotFit, NotInE,
                     Partition, TooManyDraws, TooManyParts,
                     config_from_measure, config_from_partition,
                     embed_macroscopic, embed_mesoscopic, integrate,
                     measure_to_partition, order_configuration,
                     partition_to_measure, size_biased_sample)

__all__ = [name for name in dir() if not name.startswith("_")]
