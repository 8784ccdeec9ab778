# This file is part of soliton_forge.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from __future__ import annotations

__all__ = ("Report", "main")

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Sequence

import numpy as np

from ._config import ConfigError, RunConfig, config_hash
from ._connection import FrameIntegrationError
from ._dressing import BigCellError, UnSolution, curved_flat, dress, dress_linear, dress_ode
from ._grid import GridError
from ._gsge import BtDiag, DegenerateDataError, GsgeState, gsge_backlund, gsge_backlund_residual
from ._gsge import gsge_permutability, linear_backlund
from ._io import SolutionFormatError, read_solution, write_solution
from ._isothermic import (
    christoffel_pair_method1,
    christoffel_pair_method2,
    cylinder_data,
    plane_data,
    sphere_data,
    verify_pair,
)
from ._lattice import IncompleteLatticeError, bianchi_lattice, multi_soliton
from ._lines import CompatibilityError
from ._loops import SimpleElement, compose_f_element
from ._settings import Tolerances, kernel_threads
from ._sge import lie_transform, sge_backlund, vacuum
from ._solution import Solution, UnverifiedSolutionError
from ._surfaces import dressing_bt_surface, export_obj, fundamental_forms, sym_immersion
from .version import __version__

_LOG = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# Curvature of reconstructed surfaces is checked against this, away from
# degenerate nodes.
_CURVATURE_TOLERANCE = 1e-2

# Nodes where |sin 2q| is below this are excluded from curvature checks.
_SIN_2Q_FLOOR = 0.1

_NUMERICAL_ERRORS = (
    BigCellError,
    CompatibilityError,
    DegenerateDataError,
    FrameIntegrationError,
    IncompleteLatticeError,
    UnverifiedSolutionError,
)

_ISOTHERMIC_SEEDS = {"plane": plane_data, "cylinder": cylinder_data, "sphere": sphere_data}


class Report:
    """Checks collected during a run, written as ``report.json``."""

    def __init__(self, config: RunConfig):
        self._config = config
        self._checks: dict[str, dict[str, Any]] = {}
        self._error: str | None = None

    def add(self, name: str, value: float, threshold: float) -> None:
        """Record a check that passes if ``value <= threshold``."""
        value = float(value)
        threshold = float(threshold)
        self._checks[name] = {"value": value, "threshold": threshold, "passed": bool(value <= threshold)}

    def add_solution(self, label: str, solution: Solution) -> None:
        """Record every residual of a solution against its threshold."""
        thresholds = solution.thresholds()
        for name, value in solution.residuals.items():
            self.add(f"{label}.{name}", value, thresholds[name])

    def fail(self, error: Exception) -> None:
        """Record an error that stopped the run."""
        self._error = f"{type(error).__name__}: {error}"

    @property
    def passed(self) -> bool:
        """`True` if no error occurred and every check passed."""
        return self._error is None and all(check["passed"] for check in self._checks.values())

    def to_dict(self) -> dict[str, Any]:
        """Return the report contents."""
        result = {
            "version": __version__,
            "command": self._config.command,
            "config_hash": config_hash(self._config),
            "config": self._config.to_dict(),
            "checks": dict(sorted(self._checks.items())),
            "passed": self.passed,
        }
        if self._error is not None:
            result["error"] = self._error
        return result

    def write(self, directory: str) -> str:
        """Write ``report.json`` to a directory and return its path."""
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "report.json")
        with open(path, "w") as stream:
            json.dump(self.to_dict(), stream, indent=2, sort_keys=True)
            stream.write("\n")
        return path


def _run_sge(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    grid = config.grid_spec()
    if config.permute:
        lattice = bianchi_lattice(grid, config.mu, tolerances=tolerances)
        for key in sorted(lattice, key=lambda k: (len(k), sorted(k))):
            if len(key) > 1:
                report.add_solution("lattice_" + "_".join(str(i) for i in sorted(key)), lattice[key])
        q = lattice.top
    else:
        q = vacuum(grid, tolerances)
        for mu in config.mu:
            q = sge_backlund(q, mu, config.qstar0, substeps=config.substeps)
    if config.lie_r is not None:
        q = lie_transform(q, config.lie_r)
    report.add_solution("sge", q)
    write_solution(q, config.output, "sge")


def _default_rotation(n: int) -> np.ndarray:
    """Return the rotation by π/2 in the plane of the first two axes."""
    x0 = np.eye(n)
    x0[:2, :2] = [[0.0, 1.0], [-1.0, 0.0]]
    return x0


def _run_gsge(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    grid = config.grid_spec()
    A0 = GsgeState.identity(grid, tolerances)
    X0 = _default_rotation(config.n)
    transforms = []
    for k, theta in enumerate(config.theta, start=1):
        lam = BtDiag.from_angle(theta).lam
        if config.linear:
            y0 = np.hstack([-X0, np.eye(config.n)])
            A = linear_backlund(A0, lam, y0, substeps=config.substeps)
        else:
            A = gsge_backlund(A0, lam, X0, reproject=True, substeps=config.substeps)
        report.add_solution(f"gsge_{k}", A)
        write_solution(A, config.output, f"gsge_{k}")
        transforms.append((A, theta, lam))
    if len(transforms) == 2:
        (A1, theta1, lam1), (A2, theta2, lam2) = transforms
        A3 = gsge_permutability(A0, A1, A2, theta1, theta2)
        report.add_solution("gsge_12", A3)
        for label, seed, lam in (("bt_1", A1, lam2), ("bt_2", A2, lam1)):
            mask = A3.valid & seed.valid
            residual = max(field.max_norm(mask) for field in gsge_backlund_residual(seed, A3, lam))
            report.add(f"gsge_12.{label}", residual, tolerances.residual)
        write_solution(A3, config.output, "gsge_12")


def _run_dress(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    grid = config.grid_spec()
    v = UnSolution.vacuum(grid, tolerances)
    if config.alpha is not None:
        alpha = complex(*config.alpha)
    else:
        alpha = 1j * (1.0 if config.s is None else config.s)
    direction = np.ones(config.n) if config.direction is None else np.asarray(config.direction)
    if direction.shape != (config.n,):
        raise ConfigError(f"direction must have {config.n} entries.")
    element = SimpleElement.from_vectors(alpha, direction)
    kwargs = {"substeps": config.substeps}
    if config.method == "algebraic":
        loop = compose_f_element(alpha, element.pi) if alpha.real != 0.0 else element
        dressed, family = dress(v, loop, **kwargs)
        flat = curved_flat(family).values
        adjoint = np.conj(np.swapaxes(flat, -1, -2))
        unitarity = float(np.max(np.abs(adjoint @ flat - np.eye(config.n))))
        report.add("curved_flat.unitarity", unitarity, tolerances.residual)
        if dressed.real:
            symmetry = float(np.max(np.abs(flat - np.swapaxes(flat, -1, -2))))
            report.add("curved_flat.symmetry", symmetry, tolerances.residual)
    elif config.method == "ode":
        dressed = dress_ode(v, element, **kwargs)
    else:
        dressed = dress_linear(v, element, **kwargs)
    report.add_solution("un", dressed)
    write_solution(dressed, config.output, "un")


def _run_isothermic(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    grid = config.grid_spec()
    data = _ISOTHERMIC_SEEDS[config.seed](grid, tolerances)
    report.add_solution("isothermic", data)
    first = christoffel_pair_method1(data, substeps=config.substeps)
    second = christoffel_pair_method2(data, substeps=config.substeps)
    agreement = max(
        float(np.max(np.abs(first.f.points.values - second.f.points.values))),
        float(np.max(np.abs(first.f_dual.points.values - second.f_dual.points.values))),
    )
    report.add("pair.method_agreement", agreement, tolerances.residual)
    for name, value in verify_pair(first, data).errors().items():
        report.add(f"pair.{name}", value, tolerances.residual)
    write_solution(data, config.output, "isothermic")
    export_obj(first.f, os.path.join(config.output, "f.obj"))
    export_obj(first.f_dual, os.path.join(config.output, "f_dual.obj"))


def _curvature_mask(q: np.ndarray) -> np.ndarray:
    return np.abs(np.sin(2.0 * q)) > _SIN_2Q_FLOOR


def _run_surface(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    grid = config.grid_spec()
    os.makedirs(config.output, exist_ok=True)
    if config.isothermic_seed is not None:
        data = _ISOTHERMIC_SEEDS[config.isothermic_seed](grid, tolerances)
        pair = christoffel_pair_method1(data, substeps=config.substeps)
        for name, value in verify_pair(pair, data).errors().items():
            report.add(f"pair.{name}", value, tolerances.residual)
        fundamental_forms(pair.f).to_csv(os.path.join(config.output, "surface_forms.csv"))
        export_obj(pair.f, os.path.join(config.output, "surface.obj"))
        export_obj(pair.f_dual, os.path.join(config.output, "surface_dual.obj"))
        return
    q = multi_soliton(grid, config.mu, tolerances)
    report.add_solution("sge", q)
    surface = sym_immersion(q, config.sym_r, substeps=config.substeps)
    forms = fundamental_forms(surface)
    expected = -4.0 * config.sym_r**2
    curvature = forms.curvature_error(expected, _curvature_mask(q.q.values))
    report.add("surface.curvature", curvature, _CURVATURE_TOLERANCE)
    forms.to_csv(os.path.join(config.output, "surface_forms.csv"))
    export_obj(surface, os.path.join(config.output, "surface.obj"))
    if config.dress_s is not None:
        image = np.array([1.0, 0.0]) if config.direction is None else np.asarray(config.direction)
        if image.shape != (2,):
            raise ConfigError("the dressing direction of a surface must have 2 entries.")
        pi = np.outer(image, image) / float(image @ image)
        q_hat, dressed = dressing_bt_surface(q, config.dress_s, pi, substeps=config.substeps)
        report.add_solution("sge_dressed", q_hat)
        dressed_forms = fundamental_forms(dressed)
        report.add(
            "surface_dressed.curvature",
            dressed_forms.curvature_error(-1.0, _curvature_mask(q_hat.q.values)),
            _CURVATURE_TOLERANCE,
        )
        dressed_forms.to_csv(os.path.join(config.output, "surface_dressed_forms.csv"))
        export_obj(dressed, os.path.join(config.output, "surface_dressed.obj"))


def _run_check(config: RunConfig, tolerances: Tolerances, report: Report) -> None:
    assert config.path is not None
    solution = read_solution(config.path, tolerances if config.tolerances else None)
    report.add_solution(solution.kind, solution)


_RUNNERS: dict[str, Callable[[RunConfig, Tolerances, Report], None]] = {
    "sge": _run_sge,
    "gsge": _run_gsge,
    "dress": _run_dress,
    "isothermic": _run_isothermic,
    "surface": _run_surface,
    "check": _run_check,
}


def _parse_grid(text: str) -> list[int]:
    try:
        return [int(part) for part in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like NxM, not {text!r}") from None


def _parse_bounds(text: str) -> list[float]:
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bounds must look like lo:hi, not {text!r}") from None
    return [lo, hi]


def _parse_assignment(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    try:
        if not sep:
            raise ValueError(text)
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected name=value, not {text!r}") from None


def _parse_dress(text: str) -> float:
    name, value = _parse_assignment(text)
    if name != "s":
        raise argparse.ArgumentTypeError(f"expected s=VALUE, not {text!r}")
    return value


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, not {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=_parse_grid, help="nodes per axis, e.g. 101x101 or 41")
    common.add_argument("--bounds", type=_parse_bounds, help="coordinate range lo:hi of every axis")
    common.add_argument("--output", help="output directory")
    common.add_argument("--config", help="JSON configuration file; flags override its values")
    common.add_argument(
        "--tolerance",
        type=_parse_assignment,
        action="append",
        metavar="NAME=VALUE",
        help="override a numerical tolerance (repeatable)",
    )
    common.add_argument("--log-level", dest="log_level", help="logging level (default INFO)")
    common.add_argument("--substeps", type=int, help="RK4 steps per grid cell")

    parser = argparse.ArgumentParser(prog="soliton-forge", description="Explicit soliton constructions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sge = subparsers.add_parser("sge", parents=[common], help="sine-Gordon Bäcklund transforms")
    sge.add_argument("--mu", type=float, action="append", help="Bäcklund parameter (repeatable)")
    sge.add_argument("--permute", action="store_const", const=True, help="close the Bianchi lattice")
    sge.add_argument("--qstar0", type=float, help="basepoint value of each transform")
    sge.add_argument("--lie-r", dest="lie_r", type=float, help="apply a Lie transform")

    gsge = subparsers.add_parser("gsge", parents=[common], help="generalized sine-Gordon transforms")
    gsge.add_argument("--n", type=int, help="matrix size and dimension")
    gsge.add_argument("--theta", type=float, action="append", help="Bäcklund angle (repeatable)")
    gsge.add_argument("--linear", action="store_const", const=True, help="use the linear system")

    dress_parser = subparsers.add_parser("dress", parents=[common], help="dress the U(n) vacuum")
    dress_parser.add_argument("--n", type=int, help="matrix size and dimension")
    pole = dress_parser.add_mutually_exclusive_group()
    pole.add_argument("--s", type=float, help="imaginary pole is")
    pole.add_argument("--alpha", type=_parse_floats, help="pole as re,im")
    dress_parser.add_argument("--direction", type=_parse_floats, help="projection image vector")
    dress_parser.add_argument("--method", choices=("algebraic", "ode", "linear"))

    iso = subparsers.add_parser("isothermic", parents=[common], help="Christoffel pairs")
    iso.add_argument("--seed", choices=tuple(_ISOTHERMIC_SEEDS))

    surface = subparsers.add_parser("surface", parents=[common], help="surface reconstruction")
    surface.add_argument("--from", dest="source", choices=("sge",))
    surface.add_argument("--mu", type=float, action="append", help="soliton parameter (repeatable)")
    surface.add_argument("--sym-r", dest="sym_r", type=float, help="spectral parameter of the Sym formula")
    surface.add_argument("--isothermic-seed", dest="isothermic_seed", choices=tuple(_ISOTHERMIC_SEEDS))
    surface.add_argument("--dress", dest="dress_s", type=_parse_dress, metavar="s=VALUE")
    surface.add_argument("--direction", type=_parse_floats, help="projection image vector")

    check = subparsers.add_parser("check", parents=[common], help="re-verify a written solution")
    check.add_argument("path", help="solution sidecar (JSON)")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values = RunConfig.load(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("config", "tolerance") or value is None:
            continue
        values[key] = value
    if args.tolerance:
        values["tolerances"] = {**values.get("tolerances", {}), **dict(args.tolerance)}
    values["command"] = args.command
    return RunConfig.from_mapping(values)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command-line interface.

    Parameters
    ----------
    argv : `~collections.abc.Sequence` [`str`], optional
        Arguments, excluding the program name; ``sys.argv[1:]`` if not
        given.

    Returns
    -------
    status : `int`
        0 if every check passed, 1 on a verification failure and 2 for a
        usage, configuration or input error.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_PASS if err.code in (0, None) else EXIT_USAGE
    try:
        config = _config_from_args(args)
        tolerances = config.resolved_tolerances()
        grid = config.grid_spec() if config.command != "check" else None
        kernel_threads()
    except (ConfigError, GridError, ValueError) as err:
        print(f"soliton-forge: {err}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=config.log_level, format="%(levelname)s %(name)s: %(message)s")
    if grid is not None:
        _LOG.info("Running %s on a grid with dims %s.", config.command, grid.dims)
    report = Report(config)
    try:
        _RUNNERS[config.command](config, tolerances, report)
    except (ConfigError, SolutionFormatError) as err:
        _LOG.error("%s", err)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as err:
        _LOG.error("%s", err)
        report.fail(err)
    path = report.write(config.output)
    _LOG.info("Wrote %s; %s.", path, "all checks passed" if report.passed else "verification failed")
    return EXIT_PASS if report.passed else EXIT_FAIL

