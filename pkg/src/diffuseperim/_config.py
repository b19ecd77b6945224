from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from configparser import ConfigParser, Error, SectionProxy
from dataclasses import asdict, dataclass, field, fields, replace
from os import PathLike
from pathlib import Path
from typing import Any, TypeVar

from ._exceptions import ConfigError, DiffusePerimError
from ._minimizer import SolverOptions
from ._potentials import DoubleWell, make_reference_well, normalize_well
from ._radial import GridOptions

logger: logging.Logger = logging.getLogger(__name__)

T = TypeVar("T")

KINDS = (
    "constants",
    "minimize",
    "sweep",
    "stability",
    "fuglede",
    "alexandrov",
    "verify-all",
)
SECTIONS = (
    "experiment",
    "well",
    "grid",
    "solver",
    "sweep",
    "stability",
    "alexandrov",
)


@dataclass(frozen=True)
class WellSpec:
    """
    Either the reference quartic (``name = quartic``) or a raw piecewise polynomial
    (``name = polynomial``) normalized on construction.

    Coefficients are listed in increasing powers of ``t``, pieces separated by ``;``.
    """

    name: str = "quartic"
    coefficients: tuple[tuple[float, ...], ...] = ()
    breakpoints: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.name not in ("quartic", "polynomial"):
            raise ConfigError(f"unknown well {self.name!r}")
        elif self.name == "polynomial" and not self.coefficients:
            raise ConfigError("a polynomial well needs coefficients")

    def build(self) -> DoubleWell:
        if self.name == "quartic":
            return make_reference_well()

        return normalize_well(self.coefficients, self.breakpoints)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dim: int = 2
    well: WellSpec = field(default_factory=WellSpec)
    eps: tuple[float, ...] = (0.1, 0.05, 0.025)
    sigmas: tuple[float, ...] = (0.04, 0.05, 0.06, 0.07, 0.08)
    masses: tuple[float, ...] = (0.6, 0.8, 1.0, 1.2, 1.4)
    grid: GridOptions = field(default_factory=GridOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    out: Path = Path("results")
    #: the single source of randomness of every experiment
    seed: int = 0
    threads: int = 1
    perturbations: int = 200
    rearrangements: int = 50
    spectrum_k: int = 4
    alexandrov_sigma: float = 0.05
    ells: tuple[float, ...] = (3.0, 3.5, 4.0)
    mass_bracket: tuple[float, float] = (0.25, 4.0)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(
                f"unknown experiment kind {self.kind!r}; expected one of {KINDS}"
            )
        elif self.dim < 2:
            raise ConfigError("dim must be at least 2")
        elif not self.eps or any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be positive")
        elif any(s <= 0 for s in self.sigmas) or any(m <= 0 for m in self.masses):
            raise ConfigError("sigmas and masses must be positive")
        elif not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64 bit integer")
        elif self.threads < 1:
            raise ConfigError("threads must be at least 1")
        elif self.perturbations < 1 or self.rearrangements < 1:
            raise ConfigError("batch sizes must be positive")
        elif self.spectrum_k < 2:
            raise ConfigError("spectrum_k must be at least 2")
        elif self.alexandrov_sigma <= 0:
            raise ConfigError("the Alexandrov σ must be positive")
        elif not 0 < self.mass_bracket[0] < self.mass_bracket[1]:
            raise ConfigError("the mass bracket must be an increasing positive pair")

    def to_dict(self) -> dict[str, Any]:
        """The resolved configuration, in JSON serializable form."""
        data = asdict(self)
        data["out"] = str(self.out)
        return data


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in text.replace(",", " ").split())


def _pieces(text: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(piece) for piece in text.split(";") if piece.strip())


def _pair(text: str) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise ValueError(f"expected two values, got {text!r}")

    return values[0], values[1]


def _read(
    section: SectionProxy | None,
    key: str,
    convert: Callable[[str], T],
    default: T,
) -> T:
    if section is None or key not in section:
        return default

    try:
        return convert(section[key])
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: {exc}") from None


def _options(cls: type[T], section: SectionProxy | None) -> T:
    if section is None:
        return cls()

    kwargs: dict[str, Any] = {}
    for item in fields(cls):  # type: ignore[arg-type]
        if item.name in section:
            convert = int if item.type in ("int", int) else float
            kwargs[item.name] = _read(section, item.name, convert, None)

    known = {item.name for item in fields(cls)}  # type: ignore[arg-type]
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"[{section.name}]: unknown keys {sorted(unknown)}")

    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}]: {exc}") from None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse an INI document into an :class:`ExperimentConfig`.

    :raises ConfigError: on syntax errors, unknown sections or keys, and values that
        fail validation

    """
    parser = ConfigParser(inline_comment_prefixes=("#",), default_section="__unused__")
    try:
        parser.read_string(text, source)
    except Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown sections {sorted(unknown)}")

    def section(name: str) -> SectionProxy | None:
        return parser[name] if parser.has_section(name) else None

    experiment = section("experiment")
    if experiment is None or "kind" not in experiment:
        raise ConfigError(f"{source}: [experiment] kind is required")

    well_section = section("well")
    sweep = section("sweep")
    stability = section("stability")
    alexandrov = section("alexandrov")
    defaults = ExperimentConfig("constants")
    try:
        well = WellSpec(
            name=_read(well_section, "name", str.strip, "quartic"),
            coefficients=_read(well_section, "coefficients", _pieces, ()),
            breakpoints=_read(well_section, "breakpoints", _floats, None),
        )
        config = ExperimentConfig(
            kind=experiment["kind"].strip(),
            dim=_read(experiment, "dim", int, defaults.dim),
            well=well,
            eps=_read(sweep, "eps", _floats, defaults.eps),
            sigmas=_read(sweep, "sigmas", _floats, defaults.sigmas),
            masses=_read(sweep, "masses", _floats, defaults.masses),
            grid=_options(GridOptions, section("grid")),
            solver=_options(SolverOptions, section("solver")),
            out=Path(_read(experiment, "out", str.strip, str(defaults.out))),
            seed=_read(experiment, "seed", int, defaults.seed),
            threads=_read(experiment, "threads", int, defaults.threads),
            perturbations=_read(
                stability, "perturbations", int, defaults.perturbations
            ),
            rearrangements=_read(
                stability, "rearrangements", int, defaults.rearrangements
            ),
            spectrum_k=_read(stability, "spectrum_k", int, defaults.spectrum_k),
            alexandrov_sigma=_read(
                alexandrov, "sigma", float, defaults.alexandrov_sigma
            ),
            ells=_read(alexandrov, "ells", _floats, defaults.ells),
            mass_bracket=_read(
                alexandrov, "mass_bracket", _pair, defaults.mass_bracket
            ),
        )
    except DiffusePerimError as exc:
        if isinstance(exc, ConfigError):
            raise

        raise ConfigError(f"{source}: {exc}") from exc

    logger.debug("parsed configuration from %s: %s", source, config)
    return config


def load_config(
    path: str | PathLike[str] | None,
    kind: str | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    """
    Load a configuration file, or the defaults when ``path`` is ``None``.

    :param kind: experiment kind to run, overriding the one in the file
    :param overrides: field values taken from the command line (``None`` values are
        ignored)
    :raises ConfigError: if the file cannot be read or does not validate

    """
    if path is None:
        if kind is None:
            raise ConfigError("an experiment kind is required without a config file")

        config = ExperimentConfig(kind)
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None

        config = parse_config(text, str(path))

    changes = {
        key: value for key, value in (overrides or {}).items() if value is not None
    }
    if kind is not None:
        changes["kind"] = kind

    if "out" in changes:
        changes["out"] = Path(changes["out"])

    return replace(config, **changes) if changes else config
