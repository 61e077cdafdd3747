"""Model configuration and the packed parameter vector.

A :class:`ModelConfig` names every parameter of a shared frailty model
(frailty shape(s), modulation rate, baseline hazards of both events),
records which are free, and maps the free ones between the natural scale
and the unconstrained scale seen by the optimizer.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import GenGammaParams
from .exceptions import DomainError
from .frailty import FrailtySpec, ModulationFn
from .survival import HazardSpec

__all__ = ["ParamSpec", "ModelConfig", "MODEL_MENU", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
LINKS = ("log", "identity", "logit")
FAMILIES = ("gamma", "gengamma")
PARAMETRIZATIONS = ("k_beta", "alpha_beta")


@dataclass(frozen=True)
class ParamSpec:
    """One named model parameter.

    ``link`` maps the natural value to the optimizer scale, which is then
    divided by ``scale``.  ``lower``/``upper`` bound identity-link values and
    define the interval of logit-link values.  ``scale=None`` asks the fitter
    to choose a data-dependent scale.
    """

    name: str
    value: float
    free: bool = True
    link: str = "log"
    lower: float | None = None
    upper: float | None = None
    scale: float | None = 1.0

    def __post_init__(self):
        if self.link not in LINKS:
            raise DomainError(f"{self.name}: unknown link {self.link!r}")
        if not np.isfinite(self.value):
            raise DomainError(f"{self.name}: initial value must be finite")
        if self.link == "log" and self.value <= 0:
            raise DomainError(f"{self.name}: log link needs a positive value, got {self.value}")
        if self.link == "logit":
            if self.lower is None or self.upper is None or not self.lower < self.value < self.upper:
                raise DomainError(f"{self.name}: logit link needs lower < value < upper")

    @property
    def _scale(self):
        return 1.0 if self.scale is None else self.scale

    def to_internal(self, v):
        if self.link == "log":
            z = math.log(v) if v > 0 else -math.inf
        elif self.link == "identity":
            z = v
        else:
            p = (v - self.lower) / (self.upper - self.lower)
            z = math.log(p) - math.log1p(-p)
        return z / self._scale

    def to_natural(self, z):
        z = z * self._scale
        if self.link == "log":
            return math.exp(z)
        if self.link == "identity":
            return z
        return self.lower + (self.upper - self.lower) / (1.0 + math.exp(-z))

    def natural_derivative(self, z):
        """``d natural / d internal`` at internal value ``z``."""
        v = self.to_natural(z)
        if self.link == "log":
            return v * self._scale
        if self.link == "identity":
            return self._scale
        p = (v - self.lower) / (self.upper - self.lower)
        return (self.upper - self.lower) * p * (1.0 - p) * self._scale

    def internal_bounds(self):
        if self.link != "identity":
            return (None, None)
        lo = None if self.lower is None else self.lower / self._scale
        hi = None if self.upper is None else self.upper / self._scale
        return (lo, hi)

    def contains(self, v):
        if self.lower is not None and v < self.lower:
            return False
        if self.upper is not None and v > self.upper:
            return False
        return not (self.link == "log" and v <= 0)


def _hazard_param_names(hazard, event):
    if hazard.kind == "log_linear":
        return [f"a{event}", f"b{event}"]
    return [f"lambda{event}_{i}" for i in range(len(hazard.rates))]


def _hazard_param_values(hazard):
    if hazard.kind == "log_linear":
        return [hazard.a, hazard.b]
    return list(hazard.rates)


@dataclass(frozen=True)
class ModelConfig:
    """Shared frailty model for bivariate current status data.

    Parameters
    ----------
    family : {"gamma", "gengamma"}
        Distribution of the unit-mean base frailty ``U``.
    modulation : {"constant_one", "exp_quadratic", "exp_transition"}
        Form of ``h(t)``.
    two_component : bool
        Multiply by an independent unit-mean gamma ``V`` with shape ``k2``.
    hazard1, hazard2 : HazardSpec
        Baseline hazard templates; their rates (or ``a``, ``b``) are the
        initial values unless overridden in ``params``.
    params : tuple of ParamSpec
        Overrides for individual parameters (value, free flag, link, scale).
    parametrization : {"k_beta", "alpha_beta"}
        ``alpha_beta`` replaces ``k`` by ``alpha = k * beta`` (gengamma only).
    allow_increasing_h : bool
        Lift the default ``rho >= 0`` constraint.
    """

    family: str = "gamma"
    modulation: str = "exp_quadratic"
    two_component: bool = False
    hazard1: HazardSpec = field(default_factory=HazardSpec)
    hazard2: HazardSpec = field(default_factory=HazardSpec)
    params: tuple = ()
    parametrization: str = "k_beta"
    allow_increasing_h: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown frailty family {self.family!r}")
        if self.parametrization not in PARAMETRIZATIONS:
            raise DomainError(f"unknown parametrization {self.parametrization!r}")
        if self.parametrization == "alpha_beta" and self.family != "gengamma":
            raise DomainError("alpha_beta parametrization needs the gengamma family")
        ModulationFn(self.modulation, rho=1.0 if self.modulation == "exp_transition" else 0.0)
        if self.hazard1.delta != self.hazard2.delta:
            raise DomainError("both hazards must share delta")
        object.__setattr__(self, "params", tuple(self._resolve_params(self.params)))

    # -- parameter table -------------------------------------------------

    def _default_params(self):
        out = []
        if self.family == "gengamma":
            if self.parametrization == "alpha_beta":
                out.append(ParamSpec("alpha", 1.0))
            else:
                out.append(ParamSpec("k", 1.0))
            out.append(ParamSpec("beta", 1.0))
        else:
            out.append(ParamSpec("k", 1.0))
        if self.modulation != "constant_one":
            lower = None if self.allow_increasing_h else 0.0
            if self.modulation == "exp_quadratic":
                out.append(ParamSpec("rho", 0.0, link="identity", lower=lower, scale=None))
            else:
                out.append(ParamSpec("rho", 0.1, link="log", scale=1.0))
        if self.two_component:
            out.append(ParamSpec("k2", 1.0))
        for event, hz in ((1, self.hazard1), (2, self.hazard2)):
            names = _hazard_param_names(hz, event)
            values = _hazard_param_values(hz)
            link = "identity" if hz.kind == "log_linear" else "log"
            for n, v in zip(names, values):
                if link == "log" and v <= 0:
                    out.append(ParamSpec(n, v, link="identity", lower=0.0))
                else:
                    out.append(ParamSpec(n, v, link=link))
        return out

    def _resolve_params(self, overrides):
        defaults = self._default_params()
        by_name = {p.name: p for p in defaults}
        for p in overrides:
            if p.name not in by_name:
                raise DomainError(f"parameter {p.name!r} is not part of this model; "
                                  f"expected one of {sorted(by_name)}")
            by_name[p.name] = p
        return [by_name[p.name] for p in defaults]

    @property
    def names(self):
        return [p.name for p in self.params]

    @property
    def free_names(self):
        return [p.name for p in self.params if p.free]

    @property
    def n_params(self):
        return sum(p.free for p in self.params)

    @property
    def delta(self):
        return self.hazard1.delta

    def param(self, name):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def _free(self):
        return [p for p in self.params if p.free]

    def values(self):
        """Natural-scale values of all parameters (initial or fixed)."""
        return {p.name: p.value for p in self.params}

    def with_values(self, values, free=None):
        """Copy with parameter values (and optionally free flags) replaced."""
        new = []
        for p in self.params:
            kw = {}
            if p.name in values:
                kw["value"] = float(values[p.name])
                if p.link == "log" and kw["value"] <= 0:
                    kw.update(link="identity", lower=0.0)
            if free is not None and p.name in free:
                kw["free"] = bool(free[p.name])
            new.append(replace(p, **kw) if kw else p)
        return replace(self, params=tuple(new))

    def fix(self, *names):
        return self.with_values({}, free={n: False for n in names})

    def pack(self, values=None):
        """Natural-scale vector of the free parameters."""
        values = self.values() if values is None else {**self.values(), **values}
        return np.array([values[p.name] for p in self._free()], dtype=float)

    def unpack(self, vector):
        """All natural-scale values with the free ones taken from ``vector``."""
        vector = np.asarray(vector, dtype=float).ravel()
        free = self._free()
        if vector.size != len(free):
            raise DomainError(f"expected {len(free)} free parameters, got {vector.size}")
        out = self.values()
        out.update({p.name: float(v) for p, v in zip(free, vector)})
        return out

    def to_internal(self, vector):
        return np.array([p.to_internal(v) for p, v in zip(self._free(), vector)])

    def from_internal(self, z):
        return np.array([p.to_natural(v) for p, v in zip(self._free(), z)])

    def internal_bounds(self):
        return [p.internal_bounds() for p in self._free()]

    def jacobian_diag(self, z):
        """``d natural / d internal`` for each free parameter."""
        return np.array([p.natural_derivative(v) for p, v in zip(self._free(), z)])

    def with_auto_scales(self, t_max):
        """Resolve ``scale=None`` parameters against the largest observed time."""
        t_max = max(float(t_max), 1.0)
        new = []
        for p in self.params:
            if p.scale is None:
                s = 1.0 / t_max ** 2 if self.modulation == "exp_quadratic" else 1.0 / t_max
                p = replace(p, scale=s)
            new.append(p)
        return replace(self, params=tuple(new))

    # -- building model objects -----------------------------------------

    def frailty_spec(self, values, strict=True):
        """Frailty spec for natural ``values``.

        With ``strict=False`` an increasing ``h`` is tolerated even when the
        config forbids it (used for finite differences at the boundary).
        """
        if self.family == "gengamma":
            beta = values["beta"]
            k = values["alpha"] / beta if self.parametrization == "alpha_beta" else values["k"]
        else:
            k, beta = values["k"], 1.0
        decreasing = strict and not self.allow_increasing_h
        if self.modulation == "constant_one":
            mod = ModulationFn()
        elif self.modulation == "exp_quadratic":
            mod = ModulationFn("exp_quadratic", rho=values["rho"], constraint_decreasing=decreasing)
        else:
            mod = ModulationFn("exp_transition", rho=values["rho"], target=beta,
                               constraint_decreasing=decreasing)
        k2 = values.get("k2") if self.two_component else None
        return FrailtySpec(GenGammaParams.unit_mean(k, beta), mod, k2)

    def hazards(self, values):
        out = []
        for event, hz in ((1, self.hazard1), (2, self.hazard2)):
            names = _hazard_param_names(hz, event)
            if hz.kind == "log_linear":
                out.append(replace(hz, a=values[names[0]], b=values[names[1]]))
            else:
                out.append(replace(hz, rates=tuple(values[n] for n in names)))
        return tuple(out)

    def build(self, values=None, strict=True):
        """``(FrailtySpec, HazardSpec, HazardSpec)`` for the given values."""
        values = self.values() if values is None else {**self.values(), **values}
        h1, h2 = self.hazards(values)
        return self.frailty_spec(values, strict=strict), h1, h2

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        def hazard_dict(hz):
            d = {"kind": hz.kind}
            if hz.kind == "log_linear":
                d.update(a=hz.a, b=hz.b)
            else:
                d.update(cutpoints=list(hz.cutpoints), rates=list(hz.rates))
            return d

        vals = self.values()
        return {
            "schema_version": SCHEMA_VERSION,
            "frailty": {
                "family": self.family,
                "parametrization": self.parametrization,
                "modulation": self.modulation,
                "two_component": self.two_component,
                "allow_increasing_h": self.allow_increasing_h,
            },
            "delta": self.delta,
            "hazards": [hazard_dict(self.hazard1), hazard_dict(self.hazard2)],
            "params": {
                p.name: {
                    "value": vals[p.name],
                    "free": p.free,
                    "link": p.link,
                    "lower": p.lower,
                    "upper": p.upper,
                    "scale": p.scale,
                }
                for p in self.params
            },
        }

    @classmethod
    def from_dict(cls, d):
        """Build from the JSON model schema (see README).

        ``params`` entries may be a bare number (initial value) or an object
        with ``value``, ``free``, ``link``, ``lower``, ``upper``, ``scale``.
        A top-level ``fixed`` list marks parameters as not estimated.
        """
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise DomainError(f"unsupported model schema_version {version}")
        fr = d.get("frailty", {})
        delta = float(d.get("delta", 1.0))
        hz = d.get("hazards", [{}, {}])
        if len(hz) != 2:
            raise DomainError("model needs exactly two hazards")

        def hazard(h):
            kind = h.get("kind", "piecewise_constant")
            if kind == "log_linear":
                return HazardSpec.log_linear(float(h.get("a", -3.0)), float(h.get("b", 0.0)), delta)
            return HazardSpec.piecewise(h.get("cutpoints", []), h.get("rates", [0.05]), delta)

        base = cls(
            family=fr.get("family", "gamma"),
            modulation=fr.get("modulation", "exp_quadratic"),
            two_component=bool(fr.get("two_component", False)),
            hazard1=hazard(hz[0]),
            hazard2=hazard(hz[1]),
            parametrization=fr.get("parametrization", "k_beta"),
            allow_increasing_h=bool(fr.get("allow_increasing_h", False)),
        )
        fixed = set(d.get("fixed", []))
        overrides = []
        for p in base.params:
            spec = d.get("params", {}).get(p.name)
            kw = {}
            if isinstance(spec, dict):
                for key in ("value", "free", "link", "lower", "upper", "scale"):
                    if key in spec:
                        kw[key] = spec[key]
            elif spec is not None:
                kw["value"] = float(spec)
            if p.name in fixed:
                kw["free"] = False
            if "value" in kw and kw.get("link", p.link) == "log" and kw["value"] <= 0:
                kw.update(link="identity", lower=0.0)
            overrides.append(replace(p, **kw) if kw else p)
        return replace(base, params=tuple(overrides))

    # -- model menu ---------------------------------------------------------

    @classmethod
    def menu(cls, name, cutpoints1=(), cutpoints2=(), rates1=None, rates2=None,
             delta=1.0, allow_increasing_h=False, **values):
        """One of the standard model choices in :data:`MODEL_MENU`.

        Extra keyword arguments set initial values (``k=0.2, rho=0.01``).
        """
        try:
            kw = MODEL_MENU[name]
        except KeyError:
            raise DomainError(f"unknown model {name!r}; choose from {sorted(MODEL_MENU)}") from None
        rates1 = rates1 if rates1 is not None else [0.05] * (len(cutpoints1) + 1)
        rates2 = rates2 if rates2 is not None else [0.05] * (len(cutpoints2) + 1)
        cfg = cls(hazard1=HazardSpec.piecewise(cutpoints1, rates1, delta),
                  hazard2=HazardSpec.piecewise(cutpoints2, rates2, delta),
                  allow_increasing_h=allow_increasing_h, **kw)
        if values:
            cfg = cfg.with_values(values)
        return cfg


MODEL_MENU = {
    "gamma_with_trend": dict(family="gamma", modulation="exp_quadratic"),
    "gamma_no_trend": dict(family="gamma", modulation="constant_one"),
    "gengamma_no_trend": dict(family="gengamma", modulation="constant_one"),
    "gengamma_with_trend": dict(family="gengamma", modulation="exp_quadratic"),
    "gamma_gamma_with_trend": dict(family="gamma", modulation="exp_quadratic", two_component=True),
}
