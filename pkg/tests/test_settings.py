import math
import logging

import pytest

from layerpot.errors import ConfigurationError
from layerpot.settings import THETA_MIN, load_config, resolve_path, setup_logging, validate_theta


def test_defaults_without_config_file(tmp_path):
    config = load_config(tmp_path / "missing.ini")
    assert config["grid"].getfloat("half_width") == 1.1
    assert config["quadrature"].getfloat("theta_degrees") == 70.0
    assert config["regularization"].getfloat("on_surface_delta_ratio") == 3.0
    assert config["summation"]["backend"] == "direct"
    assert config["corrections"].getboolean("early_exit")


def test_config_file_overrides_defaults(tmp_path):
    path = tmp_path / "config.ini"
    path.write_text("[treecode]\ndegree = 8\n")
    config = load_config(path)
    assert config["treecode"].getint("degree") == 8
    assert config["treecode"].getfloat("separation") == 0.5


def test_resolve_path(tmp_path):
    config = load_config(tmp_path / "missing.ini")
    assert resolve_path(config, "log_dir").endswith("logs")
    config["paths"]["output_dir"] = str(tmp_path)
    assert resolve_path(config, "output_dir") == str(tmp_path)


def test_theta_range():
    assert validate_theta(math.radians(70)) == math.radians(70)
    assert math.degrees(THETA_MIN) == pytest.approx(54.7356, abs=1e-4)
    with pytest.raises(ConfigurationError):
        validate_theta(math.radians(50))
    with pytest.raises(ConfigurationError):
        validate_theta(math.pi / 2)


def test_setup_logging_writes_to_log_dir(tmp_path):
    config = load_config(tmp_path / "missing.ini")
    config["paths"]["log_dir"] = str(tmp_path / "logs")
    root = logging.getLogger()
    before = list(root.handlers)
    level = root.level
    try:
        path = setup_logging(config)
        logging.getLogger("layerpot.test").info("hello")
        logging.getLogger("scipy.quiet").info("not logged")
        for handler in root.handlers:
            handler.flush()
        assert path == str(tmp_path / "logs" / "layerpot.log")
        with open(path) as f:
            text = f.read()
        assert "layerpot.test - INFO - hello" in text
        assert "not logged" not in text
    finally:
        for handler in root.handlers[:]:
            if handler not in before:
                root.removeHandler(handler)
                handler.close()
        root.setLevel(level)
