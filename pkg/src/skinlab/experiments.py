"""
Orchestrated experiments: equidistribution of pushed skinning measures, cusp
decay of skinning mass, the finiteness criterion, and the disintegration check.
Each returns an ExperimentReport whose numbers depend only on (config, seed).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import hyperbolic as hb
from .config import ConfigError, basepoint, build_body, build_group
from .convex import ConvexBody, GeodesicLine
from .dynamics import (
    DirichletDomain,
    FoldError,
    TestFunction,
    axis_fundamental_arcs,
    bm_sample_domain,
    in_arcs,
    phi_integral_check,
    transport_measure,
)
from .groups import (
    GroupSpec,
    critical_exponent,
    cyclic_line_stabiliser,
    enumerate_orbit,
)
from .hyperbolic import ANGLE_TOL, Isometry
from .measures import (
    HopfBox,
    MeasureError,
    bm_sample,
    box_mass_estimate,
    default_offset,
    disintegration_rhs,
    patterson_approx,
    skinning_measure,
)

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


class RateFitError(ExperimentError):
    pass


@dataclass
class Verdict:
    name: str
    passed: bool
    measured: object
    threshold: object
    detail: str = ""


@dataclass
class ExperimentReport:
    name: str
    config: dict
    records: List[dict] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add(self, name, passed, measured, threshold, detail=""):
        self.verdicts.append(Verdict(name, bool(passed), measured, threshold, detail))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "config": self.config,
            "records": self.records,
            "fits": self.fits,
            "verdicts": [asdict(v) for v in self.verdicts],
            "extras": self.extras,
        }

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{v.name}={'ok' if v.passed else 'FAIL'}" for v in self.verdicts]
        return f"{self.name}: {status} ({', '.join(parts)})"


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(tag,))))


# ---------------------------------------------------------------------------
# shared set-up

@dataclass
class Setup:
    group: GroupSpec
    table: object
    fit: object
    P: object


def build_setup(cfg: dict, radius: Optional[float] = None) -> Setup:
    G = build_group(cfg)
    R = float(cfg["orbit"]["radius"] if radius is None else radius)
    T = enumerate_orbit(G, basepoint(cfg), R)
    fit = critical_exponent(T, cfg["orbit"]["shell_width"])
    pc = cfg["patterson"]
    off = default_offset(fit.stderr) if pc["s_offset"] is None else float(pc["s_offset"])
    P = patterson_approx(T, fit.delta, fit.delta + off, pc["horizon"])
    log.info("setup %s: %d elements within %.2f, delta %.4f +- %.4f, %d atoms",
             G.name, len(T), R, fit.delta, fit.stderr, len(P))
    return Setup(G, T, fit, P)


def omega_arcs(cfg: dict, G: GroupSpec, C: ConvexBody):
    """Configured arcs, or the fundamental arcs of the body's axis for a generator."""
    om = cfg["omega"]
    if om["arcs"] is not None:
        return [tuple(a) for a in om["arcs"]]
    if not isinstance(C, GeodesicLine):
        raise ConfigError("omega arcs are required unless the body is a geodesic axis", key="omega.arcs")
    k = om["axis_generator"]
    if k >= len(G.generators):
        raise ConfigError(f"no generator {k}", key="omega.axis_generator")
    g = G.generators[k]
    ends = hb.mobius_theta(g.matrix, np.array([C.minus, C.plus]))
    if np.max(hb.angle_gap(ends, [C.minus, C.plus])) > 1e-9:
        raise ConfigError("the chosen generator does not preserve the body", key="omega.axis_generator")
    return axis_fundamental_arcs(C, g.translation_length(), basepoint(cfg).z, om["fraction"])


def domain_for(cfg: dict, S: Setup) -> DirichletDomain:
    wr = cfg["orbit"]["wall_radius"]
    if wr is None:
        wr = 2.0 * max(g.translation_length() if g.kind() == "hyperbolic" else 2.0 for g in S.group.generators) + 0.1
    return DirichletDomain.from_table(S.table, wr)


# ---------------------------------------------------------------------------
# observables

def bump(r):
    """C^infinity bump exp(1 - 1/(1 - r^2)) on [0, 1), 1 at 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    k = r < 1.0
    out[k] = np.exp(1.0 - 1.0 / (1.0 - r[k] ** 2))
    return out


@dataclass(frozen=True)
class Bump:
    center: complex
    radius: float
    direction: Optional[float] = None
    halfwidth: float = math.pi

    def __call__(self, F):
        F = np.asarray(F, dtype=float)
        val = bump(hb.dist_z(hb.frame_base(F), self.center) / self.radius)
        if self.direction is not None:
            val = val * bump(hb.angle_gap(hb.frame_dir(F), self.direction) / self.halfwidth)
        return val


@dataclass
class ObservableFamily:
    bumps: List[Bump]
    constant: bool = True

    def __len__(self):
        return len(self.bumps) + int(self.constant)

    def labels(self) -> List[str]:
        out = ["const"] if self.constant else []
        return out + [f"psi_{k}" for k in range(len(self.bumps))]

    def evaluate(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float).reshape(-1, 4)
        rows = [np.ones(len(F))] if self.constant else []
        rows += [b(F) for b in self.bumps]
        return np.array(rows)

    @classmethod
    def default(cls, D: DirichletDomain, n_dirs: int = 4, n_ring: int = 4, margin: float = 0.05,
                constant: bool = True) -> "ObservableFamily":
        """A central bump and a ring of smaller ones, each split into direction sectors."""
        x0 = D.center
        wd = min(float(w.line.dist_to(x0)) for w in D.walls)
        r0 = wd - margin
        if r0 <= 2 * margin:
            raise ExperimentError("fundamental domain too thin for the observable family")
        spots = [(x0, r0)]
        for k in range(n_ring):
            F = hb.frame_from_base_dir(x0, (k + 0.5) * 2.0 * math.pi / n_ring)
            spots.append((complex(hb.frame_base(hb.frame_flow(F, 0.5 * r0))), 0.5 * r0 - margin))
        hw = 0.75 * math.pi if n_dirs > 1 else math.pi
        dirs = [None] if n_dirs == 1 else [2.0 * math.pi * j / n_dirs for j in range(n_dirs)]
        bumps = [Bump(c, r, d, hw) for c, r in spots for d in dirs]
        fam = cls(bumps, constant)
        fam.check_support(D, margin)
        return fam

    def check_support(self, D: DirichletDomain, margin: float):
        for b in self.bumps:
            if not bool(D.contains(b.center)):
                raise ExperimentError(f"bump centre {b.center} lies outside the domain")
            gap = min(float(w.line.dist_to(b.center)) for w in D.walls) - b.radius
            if gap < margin - 1e-12:
                raise ExperimentError(f"bump at {b.center} comes within {gap:.3f} of a wall (margin {margin})")

    def holder_norms(self, alpha: float, n_pairs: int = 2000, seed: int = 0, scale: float = 0.05) -> np.ndarray:
        """||psi||_inf + sup |psi(x) - psi(y)| / d(x, y)^alpha, the sup estimated over
        random nearby pairs inside each support (a lower estimate)."""
        rng = _rng(seed, 77)
        out = []
        for b in self.bumps:
            r = b.radius * np.sqrt(rng.random(n_pairs))
            F = hb.frame_flow(hb.frame_from_base_dir(b.center, rng.uniform(0, hb.TWO_PI, n_pairs)), r)
            F = hb.mat_mul(F, hb.rotation(rng.uniform(0, hb.TWO_PI, n_pairs)))
            step = scale * rng.random(n_pairs)
            G = hb.mat_mul(hb.frame_flow(hb.mat_mul(F, hb.rotation(rng.normal(0, 1, n_pairs) * step)), step), hb.rotation(rng.normal(0, 1, n_pairs) * step))
            d = hb.t1_dist_frames(F, G)
            ok = d > 1e-9
            diff = np.abs(b(F) - b(G))
            sup = float(np.max(diff[ok] / d[ok] ** alpha)) if np.any(ok) else 0.0
            out.append(1.0 + sup)
        return np.array(out)


def _boot_counts(rng, n):
    return np.bincount(rng.integers(0, n, n), minlength=n).astype(float)


# ---------------------------------------------------------------------------
# equidistribution

def run_equidistribution(cfg: dict) -> ExperimentReport:
    t_start = time.time()
    ec = cfg["equidistribution"]
    seed = cfg["seed"]
    rep = ExperimentReport("equidistribute", cfg)
    S = build_setup(cfg)
    if S.fit.delta <= 0.05:
        raise ExperimentError(f"estimated delta {S.fit.delta:.3f} too small (group looks elementary)")
    C = build_body(cfg)
    arcs = omega_arcs(cfg, S.group, C)
    D = domain_for(cfg, S)
    sk = skinning_measure(C, S.P)
    sig = sk.restrict(in_arcs(arcs, sk.plus))
    if len(sig) == 0 or sig.total <= 0:
        raise ExperimentError("zero skinning measure on Omega")
    t_grid = sorted(float(t) for t in ec["t_grid"])
    if not set(map(float, ec["ratio_times"])) <= set(t_grid):
        raise ConfigError("ratio_times must lie on the t grid", key="equidistribution.ratio_times")
    reach = float(np.max(hb.dist_z(D.center, hb.frame_base(sig.atoms)))) + max(t_grid)
    if reach > D.cap:
        raise FoldError(f"flow reaches distance {reach:.2f} beyond fold cap {D.cap:.2f}; "
                        f"orbit radius >= {reach + 2:.2f} needed", required_radius=reach + 2)
    obs = ObservableFamily.default(D, ec["n_dirs"], ec["n_ring"], ec["margin"], ec["include_constant"])
    holder = obs.holder_norms(ec["holder_alpha"], seed=seed)

    m = bm_sample_domain(S.P, D, ec["n_bm"], seed)
    om = obs.evaluate(m.atoms)
    mw = m.weights
    mav = om @ mw / mw.sum()
    nb = ec["n_boot"]
    rng = _rng(seed, 11)
    m_boot = np.empty((nb, len(obs)))
    for b in range(nb):
        c = _boot_counts(rng, len(mw)) * mw
        m_boot[b] = om @ c / c.sum()

    delta = S.P.delta
    for t in t_grid:
        tr = transport_measure(sig, t, D, delta, scale=True)
        os_ = obs.evaluate(tr.atoms)
        w = tr.weights
        sav = os_ @ w / w.sum()
        diff = sav - mav
        E = float(np.max(np.abs(diff)))
        rng_t = _rng(seed, 1000 + int(round(100 * t)))
        Eb = np.empty(nb)
        for b in range(nb):
            c = _boot_counts(rng_t, len(w)) * w
            Eb[b] = np.max(np.abs(os_ @ c / c.sum() - m_boot[b]))
        mass_err = abs(tr.total / (sig.total * math.exp(delta * t)) - 1.0)
        rep.records.append({
            "t": t, "E": E, "stderr": float(Eb.std(ddof=1)), "mass": tr.total,
            "mass_scaling_err": mass_err, "diffs": diff.tolist(), "sigma_avg": sav.tolist(),
        })
    rep.extras.update({
        "delta": delta, "delta_stderr": S.fit.stderr, "n_atoms": len(S.P), "n_omega": len(sig),
        "sigma_total": sig.total, "n_bm_hit": len(m), "bm_total": m.total, "bm_avg": mav.tolist(),
        "labels": obs.labels(), "holder": holder.tolist(), "walls": len(D), "fold_cap": D.cap,
        "bumps": [{"center": b.center, "radius": b.radius, "direction": b.direction, "halfwidth": b.halfwidth}
                  for b in obs.bumps],
    })

    E = {r["t"]: r for r in rep.records}
    ta, tb = map(float, ec["ratio_times"])
    rep.add("ratio", E[tb]["E"] < ec["ratio_max"] * E[ta]["E"], E[tb]["E"] / max(E[ta]["E"], 1e-300),
            ec["ratio_max"], f"E_{tb:g} / E_{ta:g}")
    worst = -math.inf
    for r0, r1 in zip(rep.records, rep.records[1:]):
        allow = ec["noise_sigma"] * max(r0["stderr"], r1["stderr"])
        worst = max(worst, (r1["E"] - r0["E"]) - allow)
    rep.add("monotone", worst <= 0, worst, 0.0, "largest rise of E beyond the noise allowance")
    if ec["final_max"] is not None:
        rep.add("final", rep.records[-1]["E"] < ec["final_max"], rep.records[-1]["E"], ec["final_max"])
    if ec["include_constant"]:
        c_err = max(abs(r["diffs"][0]) for r in rep.records)
        rep.add("constant", c_err < 1e-12, c_err, 1e-12, "constant observable discrepancy")
    mass_err = max(r["mass_scaling_err"] for r in rep.records)
    rep.add("mass_scaling", mass_err < 1e-9, mass_err, 1e-9, "||sigma_{g^t Omega}|| = e^{delta t} ||sigma_Omega||")
    try:
        k, se, r2 = fit_rate(rep)
        rep.fits["rate"] = {"kappa": k, "stderr": se, "r2": r2,
                            "caveat": "empirical exponent; compactness and exponential mixing are not certified"}
    except RateFitError as e:
        rep.fits["rate"] = {"refused": str(e)}
    rep.extras["seconds"] = time.time() - t_start
    return rep


def fit_rate(report_or_series, E: Optional[Sequence[float]] = None):
    """(kappa, stderr, r2) from a least-squares fit of log E_t = c - kappa t on the
    tail half of the series."""
    if E is None:
        recs = report_or_series.records
        t = np.array([r["t"] for r in recs], dtype=float)
        E = np.array([r["E"] for r in recs], dtype=float)
    else:
        t = np.asarray(report_or_series, dtype=float)
        E = np.asarray(E, dtype=float)
    pos = E > 0
    if pos.sum() < 5:
        raise RateFitError(f"need at least 5 positive discrepancies, have {int(pos.sum())} (noise floor reached?)")
    t, E = t[pos], E[pos]
    half = len(t) // 2
    tt, y = t[half:], np.log(E[half:])
    if len(tt) < 3:
        raise RateFitError("tail too short for a fit")
    A = np.vstack([np.ones_like(tt), tt]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-24:
        raise RateFitError("series is constant on the tail; no decay to fit")
    kappa = -float(coef[1])
    if kappa <= 0:
        raise RateFitError(f"fitted exponent {kappa:.3g} is not positive; no decay to fit")
    dof = len(tt) - 2
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((tt - tt.mean()) ** 2)))
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return kappa, se, r2


# ---------------------------------------------------------------------------
# cusps and finiteness

def _exponent_subgroups(cfg: dict, C: ConvexBody):
    """(delta_p, se_p, delta_pi, se_pi) for the cusp stabiliser and its intersection
    with the stabiliser of the body."""
    cc = cfg["cusp"]
    par = Isometry.from_array(np.asarray(cc["parabolic"], dtype=float))
    if par.kind() != "parabolic":
        raise ConfigError("cusp.parabolic must be a parabolic element", key="cusp.parabolic")
    Gp = GroupSpec("cyclic", [par], "cusp")
    fp = critical_exponent(enumerate_orbit(Gp, basepoint(cfg), cc["parabolic_radius"]))
    if not isinstance(C, GeodesicLine):
        raise ConfigError("cusp experiments need a geodesic body", key="body")
    H = cyclic_line_stabiliser(par, C)
    if H.kind == "trivial":
        dpi, spi = 0.0, 0.0
    else:
        fi = critical_exponent(enumerate_orbit(H, basepoint(cfg), cc["parabolic_radius"]))
        dpi, spi = fi.delta, fi.stderr
    return fp.delta, fp.stderr, dpi, spi, par


def _lsq_slope(x, y):
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(1, len(x) - 2)
    se = math.sqrt(float(resid @ resid) / dof / float(np.sum((x - x.mean()) ** 2)))
    return float(coef[1]), se


def shadow_bins(C: GeodesicLine, S: Setup, cusp_theta: float, x0: complex, min_bin_atoms: int):
    """Masses of mu and of the skinning measure in the shadow bins A_n along the ray
    from the projection of x0 toward the cusp."""
    P = S.P
    sk = skinning_measure(C, P)
    q0 = complex(C.project_z(x0))
    feet = hb.frame_base(sk.atoms)
    pos = hb.busemann_z(cusp_theta, q0, feet)  # distance travelled toward the cusp
    n_max = int(math.floor(0.5 * P.horizon))
    rows = []
    for n in range(n_max):
        sel = (pos >= n) & (pos < n + 1)
        rows.append((n, int(sel.sum()), float(P.weights[sk.source[sel]].sum()), float(sk.weights[sel].sum())))
    # keep the leading run of well-populated bins
    good = []
    for r in rows:
        if r[1] < min_bin_atoms:
            break
        good.append(r)
    return rows, good, sk


def run_cusp_decay(cfg: dict) -> ExperimentReport:
    cc = cfg["cusp"]
    rep = ExperimentReport("cusp-decay", cfg)
    G = build_group(cfg)
    if G.kind != "modular":
        raise ConfigError("cusp decay needs a modular group", key="group.kind")
    C = build_body(cfg)
    cusp = 0.0  # p = infinity
    if not (isinstance(C, GeodesicLine) and min(hb.angle_gap(cusp, C.minus), hb.angle_gap(cusp, C.plus)) <= ANGLE_TOL):
        raise ConfigError("the body must be a geodesic ending at the cusp infinity", key="body")
    x0 = basepoint(cfg).z
    dp, sp, dpi, spi, _ = _exponent_subgroups(cfg, C)
    fits = []
    for R in (cfg["orbit"]["radius"], cfg["orbit"]["radius"] + cc["refine_step"]):
        S = build_setup(cfg, R)
        rows, good, _ = shadow_bins(C, S, cusp, x0, cc["min_bin_atoms"])
        n_atoms = sum(r[1] for r in good)
        if n_atoms < cc["min_atoms"] or len(good) < 3:
            raise ExperimentError(f"too few atoms in the cusp region at radius {R}: {n_atoms} in {len(good)} bins")
        n = np.array([r[0] for r in good], dtype=float)
        s_mu, se_mu = _lsq_slope(n, np.log([r[2] for r in good]))
        s_sk, se_sk = _lsq_slope(n, np.log([r[3] for r in good]))
        fits.append({"radius": R, "delta": S.fit.delta, "delta_stderr": S.fit.stderr, "bins": rows,
                     "n_bins_fit": len(good), "slope_mu": s_mu, "slope_mu_se": se_mu,
                     "slope_skin": s_sk, "slope_skin_se": se_sk})
        for r in rows:
            rep.records.append({"radius": R, "n": r[0], "atoms": r[1], "mu_mass": r[2], "skin_mass": r[3]})
    f0, f1 = fits
    delta = f0["delta"]
    theory = 2.0 * (dp - dpi) - delta
    rep.fits.update({"runs": fits, "delta_p": dp, "delta_p_stderr": sp, "delta_pi": dpi, "delta_pi_stderr": spi,
                     "theory_slope": theory})
    slope = f0["slope_skin"]
    tol = cc["slope_rel_tol"] * abs(theory)
    rep.add("slope_rel", abs(slope - theory) <= tol, slope, [theory - tol, theory + tol],
            "fitted skinning slope vs 2(delta_p - delta_pi) - delta")
    rep.add("slope_bound", slope <= theory + tol, slope, theory + tol, "upper bound on the skinning slope")
    rep.add("delta_p", abs(dp - cc["delta_p_ref"]) <= cc["delta_p_tol"], dp, [cc["delta_p_ref"], cc["delta_p_tol"]])
    diff = abs(f1["slope_skin"] - f0["slope_skin"])
    allow = cc["refine_sigma"] * math.hypot(f0["slope_skin_se"], f1["slope_skin_se"])
    rep.add("refinement", diff <= allow, diff, allow, f"slope change under radius +{cc['refine_step']:g}")
    rep.add("bin0", f0["bins"][0][1] > 0, f0["bins"][0][1], 1, "atoms in the first shadow bin")
    return rep


def check_finiteness_criterion(cfg: dict) -> ExperimentReport:
    cc = cfg["cusp"]
    rep = ExperimentReport("finiteness", cfg)
    G = build_group(cfg)
    C = build_body(cfg)
    R = cfg["orbit"]["radius"]
    radii = (R - cc["refine_step"], R)
    if G.kind == "schottky":
        masses = []
        for r in radii:
            S = build_setup(cfg, r)
            sk = skinning_measure(C, S.P)
            arcs = omega_arcs(cfg, G, C) if isinstance(C, GeodesicLine) or cfg["omega"]["arcs"] else None
            masses.append(sk.restrict(in_arcs(arcs, sk.plus)).total if arcs else sk.total)
        rel = abs(masses[1] / masses[0] - 1.0)
        rep.fits.update({"classification": "finite", "reason": "no cusps: the support of sigma is compact",
                         "mass_by_radius": dict(zip(map(float, radii), masses))})
        rep.add("criterion", True, "vacuous", "no parabolic elements")
        rep.add("mass_trend", rel < 0.05, rel, 0.05, "relative change of ||sigma_Omega|| under refinement")
        return rep
    if G.kind != "modular":
        raise ConfigError("finiteness check needs a schottky or modular group", key="group.kind")
    dp, sp, dpi, spi, _ = _exponent_subgroups(cfg, C)
    masses, deltas = [], []
    for r in radii:
        S = build_setup(cfg, r)
        masses.append(skinning_measure(C, S.P).total)
        deltas.append((S.fit.delta, S.fit.stderr))
    delta, sd = deltas[-1]
    bound = 2.0 * (dp - dpi)
    margin = delta - bound
    se = math.sqrt(sd ** 2 + 4 * sp ** 2 + 4 * spi ** 2)
    k = 3.0
    if margin > k * se:
        cls = "finite"
    elif margin < -k * se:
        cls = "infinite"
    else:
        cls = "inconclusive"
    growth = masses[1] / masses[0]
    rep.fits.update({"delta": delta, "delta_stderr": sd, "delta_p": dp, "delta_p_stderr": sp, "delta_pi": dpi,
                     "bound": bound, "margin": margin, "margin_stderr": se, "classification": cls,
                     "mass_by_radius": dict(zip(map(float, radii), masses)), "mass_growth": growth})
    rep.add("codim_bound", bound <= 1.0 + k * 2 * sp, bound, 1.0 + k * 2 * sp, "2(delta_p - delta_pi) <= codim")
    rep.add("criterion", True, cls, f"margin {margin:.4f} +- {se:.4f} (band {k:g} se)",
            "delta > 2(delta_p - delta_pi) evaluated with error bars")
    if cls == "finite":
        rep.add("mass_trend", growth < 1.05, growth, 1.05, "skinning mass must not grow under refinement")
    else:
        rep.extras["mass_trend_note"] = f"skinning mass grows by a factor {growth:.4f} under radius +{cc['refine_step']:g}"
    return rep


# ---------------------------------------------------------------------------
# disintegration

def run_disintegration_check(cfg: dict) -> ExperimentReport:
    dc = cfg["disintegration"]
    rep = ExperimentReport("disintegration", cfg)
    if not dc["boxes"]:
        raise ConfigError("no boxes configured", key="disintegration.boxes")
    S = build_setup(cfg, dc["orbit_radius"])
    C = build_body(cfg)
    boxes = [HopfBox(tuple(b["minus_arc"]), tuple(b["plus_arc"]), tuple(b["t_window"])) for b in dc["boxes"]]
    lo = min(b.t_window[0] for b in boxes)
    hi = max(b.t_window[1] for b in boxes)
    sample = bm_sample(S.P, dc["n_samples"], (lo, hi), cfg["seed"])
    n_eval = 0
    worst = 0.0
    for k, box in enumerate(boxes):
        rec = {"box": k, "minus_arc": box.minus_arc, "plus_arc": box.plus_arc, "t_window": box.t_window}
        try:
            rhs = disintegration_rhs(C, S.P, box)
        except MeasureError as e:
            rec.update({"status": "error", "detail": str(e)})
            rep.records.append(rec)
            rep.add(f"box{k}", False, None, None, str(e))
            continue
        est, se, hits = box_mass_estimate(sample, box, dc["n_boot"], cfg["seed"] + k)
        inside = sample.weights[box.contains(sample.coords[:, 0], sample.coords[:, 1], sample.coords[:, 2])]
        ess = float(inside.sum() ** 2 / np.sum(inside ** 2)) if len(inside) else 0.0
        rec.update({"lhs": est, "rhs": rhs, "stderr": se, "hits": hits, "ess": ess})
        if ess < dc["min_ess"]:
            rec["status"] = "skipped"
            rep.records.append(rec)
            continue
        z = abs(est - rhs) / se if se > 0 else (0.0 if est == rhs else math.inf)
        rec.update({"z": z, "status": "ok" if z <= dc["sigma"] else "fail"})
        rep.records.append(rec)
        n_eval += 1
        worst = max(worst, z)
    rep.add("boxes", n_eval > 0 and all(r.get("status") in ("ok", "skipped") for r in rep.records),
            worst, dc["sigma"], f"{n_eval} boxes compared, worst |lhs - rhs| / stderr")
    rep.extras.update({"delta": S.P.delta, "n_atoms": len(S.P), "n_samples": dc["n_samples"]})
    return rep


# ---------------------------------------------------------------------------
# integral identity

def run_phi_check(cfg: dict):
    """(lhs, rhs, stderr, TestFunction) of the phi_eta integral identity."""
    tc = cfg["test_function"]
    S = build_setup(cfg, tc["orbit_radius"])
    C = build_body(cfg)
    arcs = omega_arcs(cfg, S.group, C)
    F = TestFunction.build(C, S.P, arcs, tc["eta"], tc["R"], tc["R0"])
    lhs, rhs, se = phi_integral_check(F, tc["n_samples"], cfg["seed"])
    return lhs, rhs, se, F
