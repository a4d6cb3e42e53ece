"""Stage-by-stage proof pipeline with persisted, digest-chained certificates.

Stages (dependency order):

    lyapunov -> manifold -> homoclinic -> transversality -> persistence
             -> scattering -> lipschitz -> diffusion

Each stage writes `<out>/<stage>.json` carrying its key constants, interval
bounds serialized with outward decimal rounding, the configuration echo, and
the sha256 digests of its direct inputs; downstream stages refuse to run when
an upstream file is missing or its digest changed.  Re-running a stage with
the same configuration and seeds is deterministic byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import pickle
import time
from dataclasses import dataclass, asdict

import numpy as np

from .interval import Interval
from .intlin import Box, fmt_outward
from .flow import IntegratorOptions
from .model import Model, ModelParams
from . import shooting
from .shooting import (verify_lyapunov_family, verify_homoclinic,
                       lyapunov_seed, homoclinic_seed, ManifoldCurve)
from .cones import (certify_unstable_manifold, certify_extended_fibers,
                    CANONICAL_FRAME)
from . import diffusion as diff

__all__ = ["PipelineConfig", "StageReport", "Pipeline", "STAGES",
            "ConfigError"]

STAGES = ("lyapunov", "manifold", "homoclinic", "transversality",
          "persistence", "scattering", "lipschitz", "diffusion")

_DEPS = {
    "lyapunov": (),
    "manifold": ("lyapunov",),
    "homoclinic": ("lyapunov", "manifold"),
    "transversality": ("homoclinic", "manifold"),
    "persistence": ("lyapunov",),
    "scattering": ("lyapunov", "homoclinic", "manifold"),
    "lipschitz": ("lyapunov", "manifold"),
    "diffusion": ("lyapunov", "homoclinic", "manifold", "scattering",
                  "lipschitz"),
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    mu: float = 0.0009537
    family_x_lo: float = -0.95
    family_x_width: float = 1e-9
    n_lyap: int = 14
    n_hom: int = 20
    manifold_radius: float = 3e-8
    cone_aperture: float = 5e-6
    fiber_angular: float = 3.0
    lipschitz_safety: float = 2.0
    strip_center_up: float = math.pi + 0.65
    strip_center_down: float = 0.65
    strip_half_width: float = 0.125
    strip_fragments: int = 25
    integrator_order: int = 18
    integrator_tol: float = 1e-16
    threads: int = 1
    out_dir: str = "certificates"
    seeds_path: str = None

    @staticmethod
    def load(path) -> "PipelineConfig":
        with open(path) as f:
            raw = json.load(f)
        cfg = PipelineConfig()
        for k, v in raw.items():
            if not hasattr(cfg, k):
                raise ConfigError(f"unknown configuration key {k!r}")
            setattr(cfg, k, v)
        cfg.validate()
        return cfg

    def validate(self):
        if not (0.0 < self.mu < 0.5):
            raise ConfigError("mu must lie in (0, 1/2)")
        if self.family_x_width <= 0:
            raise ConfigError("family interval width must be positive")
        if not (-1.0 < self.family_x_lo < 0.0):
            raise ConfigError("family crossing must lie between the primaries")
        for name in ("manifold_radius", "cone_aperture", "strip_half_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.strip_fragments < 1:
            raise ConfigError("at least one strip fragment required")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def family_x(self) -> Interval:
        return Interval(self.family_x_lo, self.family_x_lo + self.family_x_width)

    def opts(self) -> IntegratorOptions:
        return IntegratorOptions(order=self.integrator_order,
                                 tol=self.integrator_tol)

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class StageReport:
    stage: str
    status: str          # verified | failed | inconclusive
    wall_time: float
    digest: str = ""
    constants: dict = None
    message: str = ""


def _iv(x: Interval):
    lo, hi = fmt_outward(x)
    return [lo, hi]


def _box(b: Box):
    return [_iv(b[i]) for i in range(b.dim)]


def _digest(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


class Pipeline:
    """Runs stages, persists certificates, enforces digest chaining."""

    def __init__(self, config: PipelineConfig, reseed: bool = False):
        config.validate()
        self.config = config
        self.model = Model(ModelParams(config.mu))
        self.reseed = reseed
        os.makedirs(config.out_dir, exist_ok=True)
        self._mem = {}

    # -- seeds --------------------------------------------------------------

    def _seeds_file(self):
        if self.config.seeds_path:
            return self.config.seeds_path
        return os.path.join(os.path.dirname(__file__), "_seeds.json")

    def seeds(self) -> dict:
        path = self._seeds_file()
        if not self.reseed and os.path.exists(path):
            with open(path) as f:
                stored = json.load(f)
            if abs(stored.get("mu", -1) - self.config.mu) < 1e-15 and \
               abs(stored.get("family_x_lo", 1) - self.config.family_x_lo) < 1e-15 \
               and stored.get("n_lyap") == self.config.n_lyap \
               and stored.get("n_hom") == self.config.n_hom:
                return stored
        stored = self.regenerate_seeds(path)
        return stored

    def regenerate_seeds(self, path=None) -> dict:
        cfg = self.config
        lseed = lyapunov_seed(self.model, cfg.family_x_lo, cfg.n_lyap)
        fam = verify_lyapunov_family(self.model, cfg.family_x(), cfg.n_lyap,
                                     seed=lseed, opts=cfg.opts())
        hseed = homoclinic_seed(self.model, fam.points[0].mid, CANONICAL_FRAME,
                                cfg.manifold_radius, cfg.n_hom)
        stored = {
            "mu": cfg.mu,
            "family_x_lo": cfg.family_x_lo,
            "n_lyap": cfg.n_lyap,
            "n_hom": cfg.n_hom,
            "lyapunov": list(map(float, lseed)),
            "homoclinic": list(map(float, hseed)),
        }
        path = path or self._seeds_file()
        with open(path, "w") as f:
            json.dump(stored, f, indent=1)
        return stored

    # -- persistence of stage outputs ----------------------------------------

    def _path(self, stage):
        return os.path.join(self.config.out_dir, f"{stage}.json")

    def _obj_path(self, stage):
        return os.path.join(self.config.out_dir, f"{stage}.pkl")

    def _write(self, stage, constants, payload_obj):
        upstream = {}
        for dep in _DEPS[stage]:
            upstream[dep] = _digest(self._path(dep))
        doc = {
            "stage": stage,
            "config": self.config.echo(),
            "upstream": upstream,
            "constants": constants,
        }
        with open(self._path(stage), "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
        with open(self._obj_path(stage), "wb") as f:
            pickle.dump(payload_obj, f)
        return _digest(self._path(stage))

    def _load(self, stage):
        if stage in self._mem:
            return self._mem[stage]
        path = self._path(stage)
        if not os.path.exists(path):
            raise ConfigError(
                f"stage {stage!r} requires upstream results; run its "
                f"dependencies first")
        with open(path) as f:
            doc = json.load(f)
        for dep, digest in doc.get("upstream", {}).items():
            if _digest(self._path(dep)) != digest:
                raise ConfigError(
                    f"upstream certificate {dep!r} changed since "
                    f"{stage!r} was produced; re-run the pipeline")
        with open(self._obj_path(stage), "rb") as f:
            obj = pickle.load(f)
        self._mem[stage] = obj
        return obj

    # -- stages --------------------------------------------------------------

    def run_stage(self, name: str) -> StageReport:
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}")
        t0 = time.time()
        try:
            runner = getattr(self, f"_stage_{name}")
            constants, payload = runner()
            digest = self._write(name, constants, payload)
            self._mem[name] = payload
            return StageReport(name, "verified", time.time() - t0, digest,
                               constants)
        except ConfigError:
            raise
        except Exception as exc:  # noqa: BLE001 - report, do not crash the CLI
            status = "inconclusive" if "inconclusive" in str(exc).lower() \
                else "failed"
            return StageReport(name, status, time.time() - t0, "",
                               None, message=str(exc))

    def run_all(self):
        reports = []
        for name in STAGES:
            rep = self.run_stage(name)
            reports.append(rep)
            if rep.status != "verified":
                break
        return reports

    def _stage_lyapunov(self):
        cfg = self.config
        seeds = self.seeds()
        fam = verify_lyapunov_family(self.model, cfg.family_x(), cfg.n_lyap,
                                     seed=np.array(seeds["lyapunov"]),
                                     opts=cfg.opts())
        constants = {
            "s": _iv(fam.s),
            "period": _iv(fam.period),
            "step_time": _iv(fam.step_time),
            "max_radius": fam.max_radius,
            "points_mid": [[float(v) for v in p.mid] for p in fam.points],
        }
        return constants, fam

    def _stage_manifold(self):
        cfg = self.config
        fam = self._load("lyapunov")
        man = certify_unstable_manifold(self.model, fam,
                                        radius=cfg.manifold_radius,
                                        aperture=cfg.cone_aperture)
        fib = certify_extended_fibers(self.model, fam, man,
                                      angular=cfg.fiber_angular)
        constants = {
            "m": _iv(man.m),
            "m_bar": _iv(man.m_bar),
            "contraction": _iv(man.contraction),
            "unstable_disc": _iv(man.unstable_disc),
            "radius": man.radius,
            "aperture": man.aperture,
            "fiber_angular": fib.angular,
            "fiber_eigvec": _box(fib.eigvec),
            "fiber_theta_slack": _iv(fib.theta_slack),
        }
        return constants, (man, fib)

    def _stage_homoclinic(self):
        cfg = self.config
        fam = self._load("lyapunov")
        man, _fib = self._load("manifold")
        seeds = self.seeds()
        curve = ManifoldCurve(fam.points[0], man.frame0.matrix,
                              man.aperture, man.radius)
        hom = verify_homoclinic(self.model, curve, cfg.n_hom,
                                seed=np.array(seeds["homoclinic"]),
                                opts=cfg.opts(), family_x=fam.family_x)
        constants = {
            "s": _iv(hom.s),
            "step_time": _iv(hom.step_time),
            "max_radius": hom.max_radius,
            "points_mid": [[float(v) for v in p.mid] for p in hom.points],
        }
        return constants, hom

    def _stage_transversality(self):
        hom = self._load("homoclinic")
        man, _ = self._load("manifold")
        tr = diff.check_transversality(self.model, hom, man)
        constants = {
            "tangent_ratio": _iv(tr.tangent_ratio),
            "x_component": _iv(tr.x_component),
            "px_component": _iv(tr.px_component),
        }
        return constants, tr

    def _stage_persistence(self):
        fam = self._load("lyapunov")
        per = diff.persistence_derivatives(self.model, fam)
        constants = {k: _iv(getattr(per, k))
                     for k in ("ds_dx", "dtau_dx", "dT_dx", "dH_dx")}
        return constants, per

    def _stage_scattering(self):
        fam = self._load("lyapunov")
        hom = self._load("homoclinic")
        _man, fib = self._load("manifold")
        sig = diff.scattering_bound(fam, hom, fib)
        constants = {
            "shift": _iv(sig.shift),
            "fiber_slack": _iv(sig.fiber_slack),
            "excursion_time": _iv(sig.excursion_time),
            "orbit_time": _iv(sig.orbit_time),
        }
        return constants, sig

    def _stage_lipschitz(self):
        fam = self._load("lyapunov")
        man, _ = self._load("manifold")
        lip = diff.lipschitz_lg(self.model, fam, man,
                                safety=self.config.lipschitz_safety)
        constants = {
            "lg": lip.lg,
            "lg_raw": lip.lg_raw,
            "safety": lip.safety,
            "max_window": max(lip.windows),
        }
        return constants, lip

    def _stage_diffusion(self):
        cfg = self.config
        fam = self._load("lyapunov")
        hom = self._load("homoclinic")
        man, fib = self._load("manifold")
        sig = self._load("scattering")
        lip = self._load("lipschitz")
        data = diff.melnikov_data(self.model, fam, hom, man, fib, sig)
        strips = (diff.StripSpec(center=cfg.strip_center_up,
                                 half_width=cfg.strip_half_width,
                                 fragments=cfg.strip_fragments, sign=+1),
                  diff.StripSpec(center=cfg.strip_center_down,
                                 half_width=cfg.strip_half_width,
                                 fragments=cfg.strip_fragments, sign=-1))
        cert = diff.certify_diffusion(self.model, data, lip, strips=strips)
        if not cert.verified:
            raise ArithmeticError("inconclusive: some fragment margin "
                                  "is not strictly positive")
        constants = {
            "lg": cert.lg,
            "penalty": _iv(cert.penalty),
            "min_margin": min(f.margin for f in cert.fragments),
            "fragments": [
                {
                    "strip": f.strip_sign,
                    "index": f.index,
                    "theta": _iv(f.theta),
                    "m": f.m,
                    "sum": _iv(f.sum),
                    "margin": f.margin,
                    "reach_n": f.reach_n,
                }
                for f in cert.fragments
            ],
        }
        return constants, (cert, data)

    # -- plot data -----------------------------------------------------------

    def emit_plot(self, kind: str, path: str, samples: int = 200):
        if kind == "homoclinic_xy":
            hom = self._load("homoclinic")
            pts = hom.mirror_points()
            with open(path, "w") as f:
                f.write("X_lo,X_hi,Y_lo,Y_hi\n")
                for p in pts:
                    xl, xh = fmt_outward(p[0])
                    yl, yh = fmt_outward(p[1])
                    f.write(f"{xl},{xh},{yl},{yh}\n")
            return path
        if kind == "energy_change_vs_theta":
            _cert, data = self._load("diffusion")
            rows = diff.five_term_sweep(data, samples)
            with open(path, "w") as f:
                f.write("theta,sum_lo,sum_hi\n")
                for th, lo, hi in rows:
                    f.write(f"{th!r},{lo!r},{hi!r}\n")
            return path
        raise ConfigError(f"unknown plot kind {kind!r}")
