"""Argument checks shared by the estimator and the command line."""

from __future__ import annotations

import numbers
import os

from .cone import STOCK_CONES, ConeSpec, read_cone, validate_cone
from .errors import TemplateMismatch
from .templates import TEMPLATES, TopologyTemplate, get_template


def check_cone(cone, allow_nonregular: bool = False) -> ConeSpec:
    """Accept a :class:`ConeSpec`, a stock cone name or a cone file path."""
    if isinstance(cone, ConeSpec):
        spec = cone
    elif isinstance(cone, (str, os.PathLike)):
        name = os.fspath(cone)
        if name in STOCK_CONES:
            spec = STOCK_CONES[name]()
        elif os.path.exists(name):
            spec = read_cone(name)
        else:
            raise ValueError(f"{name!r} is neither a cone file nor one of "
                             f"{', '.join(sorted(STOCK_CONES))}")
    else:
        raise TypeError(f"expected a ConeSpec, stock cone name or path, got {type(cone).__name__}")
    outcome = validate_cone(spec, allow_nonregular=allow_nonregular)
    if not outcome.ok:
        raise ValueError("cone is not admissible: " + "; ".join(outcome.messages()))
    return spec


def check_template(template) -> TopologyTemplate:
    if isinstance(template, TopologyTemplate):
        return template
    if not isinstance(template, str):
        raise TypeError("template must be a name or a TopologyTemplate")
    try:
        return get_template(template)
    except TemplateMismatch as exc:
        raise ValueError(str(exc)) from None


def check_positive(value, name: str, integer: bool = False, allow_zero: bool = False):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a real number'}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, "
                         f"got {value!r}")
    return value


def check_schedule(radii) -> tuple:
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise ValueError("radius schedule is empty")
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radius schedule must be positive and strictly increasing")
    return radii


def template_names() -> list:
    return sorted(TEMPLATES)
