"""Graph operators for the graph-convolution estimator."""

import numpy as np

from ..errors import ConfigError


def renormalized_adjacency(adjacency):
    """Return D^{-1/2} (A + I) D^{-1/2} for a binary adjacency matrix.

    D is the degree matrix of A + I, so every node has degree >= 1 and the
    operator is well defined for isolated nodes.  The input must be square,
    symmetric, zero on the diagonal, and contain only 0/1 entries.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"adjacency must be square, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ConfigError("adjacency must have at least one node")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ConfigError("adjacency entries must be 0 or 1")
    if np.any(np.diag(a) != 0.0):
        raise ConfigError("adjacency diagonal must be zero")
    if not np.array_equal(a, a.T):
        raise ConfigError("adjacency must be symmetric")
    a_tilde = a + np.eye(a.shape[0])
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]


def induced_adjacency(adjacency, nodes):
    """Slice the adjacency matrix down to the subgraph induced by nodes.

    nodes holds 0-based indices into the full matrix; order is preserved.
    """
    a = np.asarray(adjacency)
    idx = np.asarray(list(nodes), dtype=np.intp)
    if idx.size == 0:
        raise ConfigError("induced subgraph needs at least one node")
    if np.unique(idx).size != idx.size:
        raise ConfigError("duplicate node index in induced subgraph")
    if idx.min() < 0 or idx.max() >= a.shape[0]:
        raise ConfigError("node index out of range for adjacency matrix")
    return a[np.ix_(idx, idx)]
