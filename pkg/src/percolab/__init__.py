"""percolab: dependent 2D percolation models with exact finitary i.i.d.
representations, perfect sampling, and sharp-threshold diagnostics."""

__version__ = "0.1.0"

from .clusters import (CrossingReport, SpinField, TailFit, duality_audit,
                       fit_exponential_tail, has_crossing, label_clusters)
from .ising import (CftpResult, IsingModel, IsingParams, cftp_vertex,
                    finite_box_gibbs, heat_bath_prob, sample_window, y_pmf)
from .lattice import Adjacency, Rect, boundary, box, neighbors, parity
from .models import (BernoulliModel, MajorityWindowModel, bernoulli_field,
                     bernoulli_p, h_from_p, majority_sigma)
from .representation import (LevelDistribution, RealizationStore,
                             RepresentationProfile, is_determined,
                             logistic_family, needs, rank_of, realize)

__all__ = [
    "Adjacency", "BernoulliModel", "CftpResult", "CrossingReport",
    "IsingModel", "IsingParams", "LevelDistribution", "MajorityWindowModel",
    "RealizationStore", "Rect", "RepresentationProfile", "SpinField",
    "TailFit", "bernoulli_field", "bernoulli_p", "boundary", "box",
    "cftp_vertex", "duality_audit", "finite_box_gibbs",
    "fit_exponential_tail", "h_from_p", "has_crossing", "heat_bath_prob",
    "is_determined", "label_clusters", "logistic_family", "majority_sigma",
    "neighbors", "needs", "parity", "rank_of", "realize", "sample_window",
    "y_pmf",
]
