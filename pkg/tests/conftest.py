"""Shared fixtures: a zoo of product specs covering every block pattern."""

import numpy as np
import pytest

from warpcurv.exprs import Const, parse_expr
from warpcurv.geometry import (
    Circle,
    FiberSpec,
    FlatBase,
    FlatTorus,
    HyperbolicPlane,
    IntervalBase,
    ProductManifoldSpec,
    Sphere,
    TorsionVectorFieldSpec,
    p_dt,
)


def make_zoo():
    """(name, spec, P) triples: P on base / on fiber / absent, 1-3 fibers,
    all fiber geometries, interval and flat multi-dimensional bases, and a
    twisted case."""
    zoo = []
    zoo.append((
        "grw-exp-torus",
        ProductManifoldSpec(IntervalBase(), [FiberSpec(FlatTorus(2))],
                            [parse_expr("exp(t)")]),
        p_dt(),
    ))
    zoo.append((
        "grw-sphere",
        ProductManifoldSpec(IntervalBase(), [FiberSpec(Sphere(1.0))],
                            [parse_expr("2 + 0.5*sin(t)")]),
        p_dt(),
    ))
    zoo.append((
        "grw-hyperbolic-const",
        ProductManifoldSpec(IntervalBase(), [FiberSpec(HyperbolicPlane())],
                            [Const(2 ** -0.5)]),
        p_dt(),
    ))
    zoo.append((
        "two-fiber-scaled-p",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(Circle()), FiberSpec(FlatTorus(2))],
            [parse_expr("exp(t)"), parse_expr("2 + 0.4*cos(t)")],
        ),
        TorsionVectorFieldSpec("base", [parse_expr("0.8 + 0.3*t")]),
    ))
    zoo.append((
        "rotation-field-on-torus",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(Circle()), FiberSpec(FlatTorus(2))],
            [Const(1.0), Const(1.0)],
        ),
        TorsionVectorFieldSpec(1, [parse_expr("0-w"), parse_expr("z")]),
    ))
    zoo.append((
        "p-on-circle",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(Circle()), FiberSpec(FlatTorus(2))],
            [parse_expr("1.5 + 0.5*cos(t)"), parse_expr("exp(0.5*t)")],
        ),
        TorsionVectorFieldSpec(0, [Const(0.7)]),
    ))
    zoo.append((
        "p-on-hyperbolic",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(HyperbolicPlane()), FiberSpec(Circle())],
            [parse_expr("2 + 0.3*sin(t)"), parse_expr("exp(0.3*t)")],
        ),
        TorsionVectorFieldSpec(0, [Const(1.0), Const(0.5)]),
    ))
    zoo.append((
        "flat2-base",
        ProductManifoldSpec(
            FlatBase((-1.0, 1.0)),
            [FiberSpec(FlatTorus(2))],
            [parse_expr("exp(0.3*t + 0.4*u)")],
        ),
        TorsionVectorFieldSpec("base", [Const(0.5), Const(0.25)]),
    ))
    zoo.append((
        "flat3-base-sphere",
        ProductManifoldSpec(
            FlatBase((-1.0, 1.0, 1.0)),
            [FiberSpec(Sphere(2.0))],
            [parse_expr("1 + 0.1*t^2 + 0.05*u + 0.08*v")],
        ),
        TorsionVectorFieldSpec("base", [Const(0.4), Const(0.2), Const(0.1)]),
    ))
    zoo.append((
        "twisted-torus",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(FlatTorus(2))],
            [parse_expr("exp(0.2*t*(1 + 0.3*x^2 + 0.1*x*y))")],
            twisted=True,
        ),
        p_dt(),
    ))
    zoo.append((
        "twisted-torus-fiber-field",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(FlatTorus(2))],
            [parse_expr("exp(0.2*t)*(1 + 0.1*x^2)")],
            twisted=True,
        ),
        TorsionVectorFieldSpec(0, [Const(0.5), Const(0.3)]),
    ))
    zoo.append((
        "kasner-three-circles",
        ProductManifoldSpec(
            IntervalBase(),
            [FiberSpec(Circle()), FiberSpec(Circle()), FiberSpec(Circle())],
            [parse_expr("exp(t)"), parse_expr("exp(2*t)"), parse_expr("exp(0-3*t)")],
        ),
        p_dt(),
    ))
    zoo.append((
        "no-torsion-field",
        ProductManifoldSpec(IntervalBase(), [FiberSpec(Sphere(1.0))],
                            [parse_expr("2 + 0.5*sin(t)")]),
        None,
    ))
    return zoo


@pytest.fixture(scope="session")
def spec_zoo():
    return make_zoo()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def grw_exp_spec():
    return ProductManifoldSpec(IntervalBase(), [FiberSpec(FlatTorus(2))],
                               [parse_expr("exp(t)")])
