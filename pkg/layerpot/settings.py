import os
import math
import logging
import configparser
from logging.handlers import RotatingFileHandler

from .errors import ConfigurationError

# Get the path to the repository root (parent of the package directory)
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Construct the path to the config.ini file
config_file_path = os.path.join(parent_dir, "config.ini")

# Mirrors config.ini.example; used for any key the user did not set
DEFAULTS = {
    "grid": {"half_width": "1.1"},
    "quadrature": {"theta_degrees": "70", "root_tolerance": "1e-13"},
    "regularization": {"delta_ratio": "2", "on_surface_delta_ratio": "3"},
    "corrections": {
        "lattice_cutoff": "20",
        "early_exit": "true",
        "stencil_radius": "3.0",
        "min_stencil": "8",
    },
    "projection": {"tolerance": "1e-12", "max_iter": "50"},
    "summation": {"backend": "direct", "chunk_pairs": "2000000", "workers": "1"},
    "treecode": {"degree": "12", "separation": "0.5", "leaf_capacity": "20"},
    "paths": {"log_dir": "logs", "output_dir": "data"},
}

# Smallest admissible POU angle: the three caps must cover the sphere
THETA_MIN = math.acos(1.0 / math.sqrt(3.0))


def load_config(path=None):
    config = configparser.ConfigParser()
    config.read_dict(DEFAULTS)
    config.read(path or config_file_path)
    return config


def resolve_path(config, key):
    """Paths in [paths] are relative to the repository root unless absolute."""
    value = config["paths"][key]
    if os.path.isabs(value):
        return value
    return os.path.join(parent_dir, value)


def validate_theta(theta):
    """Check THETA_MIN < theta < pi/2 (radians) and return it."""
    if not THETA_MIN < theta < math.pi / 2:
        raise ConfigurationError(
            f"theta must lie between {math.degrees(THETA_MIN):.2f} and 90 degrees, "
            f"got {math.degrees(theta):.2f}",
            key="theta_degrees",
            value=math.degrees(theta),
        )
    return theta


def setup_logging(config, verbose=False):
    log_dir = resolve_path(config, "log_dir")
    os.makedirs(log_dir, exist_ok=True)
    log_file_path = os.path.join(log_dir, "layerpot.log")

    handler = RotatingFileHandler(log_file_path, maxBytes=10 * 1024 * 1024, backupCount=5)
    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    handler.setFormatter(formatter)

    root = logging.getLogger()
    root.setLevel(logging.WARNING)
    root.addHandler(handler)
    # only layerpot logs below WARNING
    logging.getLogger("layerpot").setLevel(logging.DEBUG)

    if verbose:
        console = logging.StreamHandler()
        console.setLevel(logging.INFO)
        console.setFormatter(formatter)
        root.addHandler(console)

    return log_file_path
