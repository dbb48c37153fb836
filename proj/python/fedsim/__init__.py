"""Deterministic simulator of federated learning under model poisoning."""

try:
    from ._fedsim import (
        alie_zmax,
        cc_clip,
        geometric_median,
        run,
        scc_cluster_sizes,
        selftest,
        sweep,
        trimmed_mean,
        validate_config,
    )
except ImportError:  # in-tree builds leave the extension next to the build dir
    from _fedsim import (
        alie_zmax,
        cc_clip,
        geometric_median,
        run,
        scc_cluster_sizes,
        selftest,
        sweep,
        trimmed_mean,
        validate_config,
    )

__version__ = "0.1.0"

__all__ = [
    "alie_zmax",
    "cc_clip",
    "geometric_median",
    "run",
    "scc_cluster_sizes",
    "selftest",
    "sweep",
    "trimmed_mean",
    "validate_config",
    "__version__",
]
