"""Scenario runner: configuration, orchestration, and artifact emission.

Configuration is plain text ``key = value`` with optional ``[section]``
headers (flattened to ``section.key``); command-line ``key=value`` pairs
override the file. Every run writes ``manifest.json`` capturing the
resolved configuration, package versions, and tolerances; identical
manifests reproduce byte-identical outputs on the same build.

Exit codes: 0 pass, 2 configuration error, 3 numeric failure
(blow-up / ill-conditioning / lost contraction), 4 declared acceptance
check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    ControlProfileSet,
    LinearModel,
    Nonlinearity,
    flow,
    poly_bump_mu4,
    poly_bump_mu5,
)
from .errors import (
    BlowupDetected,
    ConfigError,
    IllConditioned,
    NoContraction,
    RadiusNotReached,
    SignMismatch,
    ToleranceNotMet,
    TorusCtrlError,
)
from .field import FourierField, constant, harmonic, sobolev_norm
from .local_exact import global_to_constant, local_exact_to_constant
from .moment import gramian_oracle, moment_control_CH, moment_control_KS
from .saturation import mode_ladder
from .schedule import ControlSchedule
from .synthesis import (
    conjugated_limit_probe,
    reach_exponential,
    steer_same_sign,
    steer_with_hold,
)

__all__ = ["main", "run_scenario", "parse_config", "parse_state_expression"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4

_NUMERIC_ERRORS = (BlowupDetected, IllConditioned, NoContraction,
                   RadiusNotReached, SignMismatch, ToleranceNotMet)


# -- configuration -------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    section = ""
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if section:
            key = f"{section}.{key}"
        out[key] = val.strip()
    return out


class Scenario:
    """Resolved configuration with typed accessors."""

    def __init__(self, subcommand: str, values: dict[str, str]):
        self.subcommand = subcommand
        self.values = dict(values)

    def get(self, key: str, default=None) -> str | None:
        return self.values.get(key, default)

    def get_float(self, key: str, default: float | None = None) -> float:
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: not a number: {raw!r}") from exc

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: not an integer: {raw!r}") from exc

    def get_floats(self, key: str, default: str | None = None) -> list[float]:
        raw = self.values.get(key, default)
        if raw is None:
            raise ConfigError(f"missing required key {key!r}")
        try:
            return [float(x) for x in raw.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: bad number list {raw!r}") from exc

    def model(self) -> Nonlinearity:
        raw = self.values.get("model", "ks").lower()
        if raw in ("ks", "kuramoto-sivashinsky"):
            return Nonlinearity.KS
        if raw in ("ch", "cahn-hilliard"):
            return Nonlinearity.CH
        raise ConfigError(f"unknown model {raw!r}")


# -- initial-condition expression language --------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(exp\(|sin\(|cos\(|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|x|\*|\)|\+|-)")


def _tokenize(text: str) -> list[str]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or not m.group(1):
            raise ConfigError(f"cannot parse expression near {text[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


def parse_state_expression(text: str, K: int) -> FourierField:
    """const | a*sin(kx) | a*cos(kx) terms with +/-, optionally inside exp()."""
    text = text.strip()
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def parse_trig(sign: float, coef: float) -> FourierField:
        nonlocal pos
        kind = toks[pos]
        pos += 1
        k = 1
        if peek() not in ("x",):
            k = int(float(toks[pos]))
            pos += 1
        if peek() != "x":
            raise ConfigError(f"expected 'x' in {text!r}")
        pos += 1
        if peek() != ")":
            raise ConfigError(f"expected ')' in {text!r}")
        pos += 1
        amp = sign * coef
        if kind == "sin(":
            return harmonic(k, sin_amp=amp, K=K)
        return harmonic(k, cos_amp=amp, K=K)

    def parse_poly() -> FourierField:
        nonlocal pos
        acc = constant(0.0, K)
        sign = 1.0
        expect_term = True
        while pos < len(toks):
            tok = toks[pos]
            if tok == "+":
                sign, pos = 1.0, pos + 1
                expect_term = True
            elif tok == "-":
                sign, pos = -sign, pos + 1
                expect_term = True
            elif tok in ("sin(", "cos("):
                acc = acc + parse_trig(sign, 1.0)
                sign = 1.0
                expect_term = False
            elif tok == ")":
                break
            else:
                coef = float(tok)
                pos += 1
                if peek() == "*":
                    pos += 1
                    if peek() in ("sin(", "cos("):
                        acc = acc + parse_trig(sign, coef)
                    else:
                        raise ConfigError(f"expected trig after '*' in {text!r}")
                else:
                    acc = acc + constant(sign * coef, K)
                sign = 1.0
                expect_term = False
        return acc

    if peek() == "exp(":
        pos += 1
        inner = parse_poly()
        if peek() != ")":
            raise ConfigError(f"unbalanced exp() in {text!r}")
        pos += 1
        from .field import pointwise_map
        return pointwise_map(inner, np.exp)
    out = parse_poly()
    if pos != len(toks):
        raise ConfigError(f"trailing tokens in {text!r}")
    return out


def parse_schedule(text: str) -> ControlSchedule:
    """Segments 'dur:v1,v2,v3;dur:v1,v2,v3;...'."""
    segs = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"bad segment {part!r}")
        dur, vals = part.split(":", 1)
        segs.append((float(dur), tuple(float(v) for v in vals.split(","))))
    return ControlSchedule(tuple(segs))


# -- deterministic emission ------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, complex):
        return f"{_fmt(x.real)}{'+' if x.imag >= 0 else '-'}{_fmt(abs(x.imag))}j"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, payload: dict) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, default=default)
        fh.write("\n")


def write_manifest(outdir: Path, scenario: Scenario) -> None:
    import mpmath
    import scipy
    write_json(outdir / "manifest.json", {
        "subcommand": scenario.subcommand,
        "config": scenario.values,
        "versions": {
            "torusctrl": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "mpmath": mpmath.__version__,
        },
    })


def _read_profile_csv(path: Path, K: int) -> tuple[FourierField, FourierField | None]:
    """Quartic profiles from a CSV of Fourier coefficients.

    Header: k,mu4_re,mu4_im[,mu5_re,mu5_im]; rows for k >= 0 (negative
    modes follow from Hermitian symmetry).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:3] != ["k", "mu4_re", "mu4_im"]:
        raise ConfigError(f"{path}: profile CSV needs header k,mu4_re,mu4_im[,mu5_re,mu5_im]")
    has5 = len(rows[0]) >= 5
    c4 = np.zeros(2 * K + 1, dtype=np.complex128)
    c5 = np.zeros(2 * K + 1, dtype=np.complex128) if has5 else None
    for row in rows[1:]:
        k = int(row[0])
        if abs(k) > K:
            continue
        v4 = complex(float(row[1]), float(row[2]))
        c4[K + k] = v4
        if k != 0:
            c4[K - k] = np.conj(v4)
        if has5:
            v5 = complex(float(row[3]), float(row[4]))
            c5[K + k] = v5
            if k != 0:
                c5[K - k] = np.conj(v5)
    mu4 = FourierField(c4, _symmetrize=False)
    mu5 = FourierField(c5, _symmetrize=False) if has5 else None
    return mu4, mu5


def _profiles_for(scenario: Scenario, K: int, need: int) -> ControlProfileSet:
    prof_file = scenario.get("profile_file")
    if prof_file:
        mu4, mu5 = _read_profile_csv(Path(prof_file), K)
        if need >= 5 and mu5 is None:
            raise ConfigError("profile file lacks mu5 columns")
        return ControlProfileSet.standard(K, mu4, mu5 if need >= 5 else None)
    mu4 = poly_bump_mu4(K) if need >= 4 else None
    mu5 = poly_bump_mu5(K) if need >= 5 else None
    return ControlProfileSet.standard(K, mu4, mu5)


def _schedule_json(sched: ControlSchedule) -> list:
    return [{"duration": _fmt(d), "value": [_fmt(v) for v in vals]}
            for d, vals in sched.segments]


# -- subcommands ----------------------------------------------------------------

def _run_simulate(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    u0 = parse_state_expression(sc.get("u0", "1"), K)
    T = sc.get_float("T", 0.1)
    s = sc.get_float("s", 1.0)
    sched = parse_schedule(sc.get("schedule", "")) if sc.get("schedule") else None
    samples = sc.get_int("samples", 9)
    uT, rep = flow(u0, sched, sc.model(), T, s=s,
                   guard=sc.get_float("guard", 1e8),
                   rtol=sc.get_float("rtol", 1e-10), sample_count=samples)
    rows = []
    for t, f in rep.samples or [(T, uT)]:
        for i, k in enumerate(range(-f.K, f.K + 1)):
            rows.append((t, k, f.coeffs[i].real, f.coeffs[i].imag))
    write_csv(out / "trajectory.csv", ["t", "k", "re", "im"], rows)
    write_json(out / "summary.json", {
        "sup_norm": _fmt(rep.sup_norm),
        "norm_index": _fmt(s),
        "terminal_l2": _fmt(sobolev_norm(uT, 0.0)),
        "steps_accepted": rep.steps_accepted,
        "steps_rejected": rep.steps_rejected,
        "blowup": rep.blowup_flag,
    })
    return EXIT_OK


def _run_conjugate_limit(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    u0 = parse_state_expression(sc.get("u0", "1 + 0.1*cos(1x)"), K)
    phi = parse_state_expression(sc.get("phi", "1.2 + 0.2*sin(1x)"), K)
    p = tuple(sc.get_floats("p", "0.3,0,0"))
    deltas = sc.get_floats("deltas", "1e-2,5e-3,2.5e-3")
    s = sc.get_float("s", 1.0)
    rows = conjugated_limit_probe(u0, phi, p, deltas, s, sc.model())
    write_csv(out / "errors.csv", ["delta", "error"], rows)
    errs = [e for _, e in rows]
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    summary = {
        "monotone": monotone,
        "first_error": _fmt(errs[0]),
        "last_error": _fmt(errs[-1]),
        "halved": errs[-1] < 0.5 * errs[0],
    }
    write_json(out / "summary.json", summary)
    if sc.get("check", "") == "monotone" and not monotone:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def _run_synthesize(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    u0 = parse_state_expression(sc.get("u0", "1"), K)
    exponent = parse_state_expression(sc.get("exponent", "0"), K)
    plan = reach_exponential(u0, exponent, sc.get_float("eps", 5e-2),
                             sc.get_float("T", 0.5), sc.get_float("s", 1.0),
                             sc.model())
    write_json(out / "plan.json", {
        "segments": _schedule_json(plan.schedule),
        "stages": [{k: _fmt(v) if isinstance(v, float) else v
                    for k, v in st.items()} for st in plan.stages],
        "eps_achieved": _fmt(plan.eps_achieved),
        "eps_requested": _fmt(plan.eps_requested),
        "duration": _fmt(plan.total_duration),
    })
    return EXIT_OK


def _run_steer(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    u0 = parse_state_expression(sc.get("u0", "1"), K)
    u1 = parse_state_expression(sc.get("u1", "1"), K)
    eps = sc.get_float("eps", 1e-1)
    T = sc.get_float("T", 0.5)
    s = sc.get_float("s", 1.0)
    mode = sc.get("mode", "same-sign")
    if mode == "same-sign":
        plan = steer_same_sign(u0, u1, eps, T, s, sc.model())
    elif mode == "hold":
        plan = steer_with_hold(u0, u1, eps, T, s, sc.model())
    else:
        raise ConfigError(f"unknown steer mode {mode!r}")
    write_json(out / "plan.json", {
        "mode": mode,
        "segments": _schedule_json(plan.schedule),
        "eps_achieved": _fmt(plan.eps_achieved),
        "eps_requested": _fmt(eps),
        "duration": _fmt(plan.total_duration),
        "norm_index": _fmt(plan.norm_index),
    })
    return EXIT_OK


def _run_moment_control(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 32)
    model = sc.model()
    phi = sc.get_float("phi", 1.0)
    T = sc.get_float("T", 0.5)
    count = sc.get_int("count", 8)
    bits = sc.get_int("precision_bits", 384)
    v0 = parse_state_expression(sc.get("v0", "0.1*cos(1x)"), K)
    t_sweep = sc.get_floats("sweep_T", "") if sc.get("sweep_T") else [T]
    summaries = []
    for idx, Ti in enumerate(t_sweep):
        if model is Nonlinearity.CH:
            prof = _profiles_for(sc, K, 5)
            ctrl = moment_control_CH(v0, phi, prof, Ti, count,
                                     precision_bits=bits)
        else:
            prof = _profiles_for(sc, K, 4)
            ctrl = moment_control_KS(v0, phi, prof, Ti, count,
                                     precision_bits=bits)
        ts = np.linspace(0.0, Ti, sc.get_int("signal_samples", 257))
        sig_rows = []
        sampled = [s_.sample(ts).real for s_ in ctrl.p_signals]
        for i, t in enumerate(ts):
            sig_rows.append((t, *[smp[i] for smp in sampled]))
        hdr = ["t", "p4"] + (["p5"] if len(sampled) > 1 else [])
        write_csv(out / f"control_{idx}.csv", hdr, sig_rows)
        summaries.append({
            "T": _fmt(Ti),
            "l2_norms": [_fmt(n) for n in ctrl.l2_norms],
            "total_norm": _fmt(ctrl.total_l2_norm),
            "family_defect": _fmt(ctrl.family_defect),
            "terminal_residual": _fmt(ctrl.terminal_residual),
            "tail_residual": _fmt(ctrl.tail_residual),
            "max_imag": _fmt(ctrl.max_imag),
            "certificates": {k: _fmt(v) for k, v in ctrl.certificates.items()},
        })
        if sc.get("oracle", "0") == "1":
            orc = gramian_oracle(LinearModel.CH_LIN if model is Nonlinearity.CH
                                 else LinearModel.KS_LIN, phi, prof, v0, Ti, count)
            summaries[-1]["oracle_norm"] = _fmt(orc.total_l2_norm)
            summaries[-1]["oracle_residual"] = _fmt(orc.terminal_residual)
    write_csv(out / "cost.csv", ["T", "inv_T", "control_norm"],
              [(s_["T"], _fmt(1.0 / float(s_["T"])), s_["total_norm"])
               for s_ in summaries])
    write_json(out / "summary.json", {"runs": summaries})
    norms = [float(s_["total_norm"]) for s_ in summaries]
    if sc.get("check", "") == "cost-increasing" and not all(
            a < b for a, b in zip(norms, norms[1:])):
        return EXIT_ACCEPTANCE
    return EXIT_OK


def _run_local_exact(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    model = sc.model()
    phi = sc.get_float("phi", 1.0)
    u0 = parse_state_expression(sc.get("u0", "1 + 0.001*cos(1x)"), K)
    prof = _profiles_for(sc, K, 5 if model is Nonlinearity.CH else 4)
    res = local_exact_to_constant(
        u0, phi, model, prof, sc.get_float("T", 0.5),
        count=sc.get_int("count", 8))
    write_csv(out / "iterations.csv",
              ["sweep", "update_norm", "ratio", "weighted_v", "weighted_f"],
              [(s_.sweep, s_.update_norm, s_.ratio, s_.weighted_v, s_.weighted_f)
               for s_ in res.sweeps])
    write_json(out / "summary.json", {
        "converged": res.converged,
        "terminal_error": _fmt(res.terminal_error),
        "internal_terminal": _fmt(res.internal_terminal),
        "contraction_ratios": [_fmt(r) for r in res.contraction_ratios],
        "weights": {"q": _fmt(res.weights.q), "p": _fmt(res.weights.p),
                    "M": _fmt(res.weights.M), "T": _fmt(res.weights.T)},
    })
    if sc.get("check", "") == "contraction" and not all(
            r < 0.5 for r in res.contraction_ratios):
        return EXIT_ACCEPTANCE
    return EXIT_OK


def _run_global_pipeline(sc: Scenario, out: Path) -> int:
    K = sc.get_int("K", 64)
    model = sc.model()
    phi = sc.get_float("phi", 1.0)
    u0 = parse_state_expression(sc.get("u0", "2 + 0.5*sin(1x)"), K)
    prof = _profiles_for(sc, K, 5 if model is Nonlinearity.CH else 4)
    res = global_to_constant(u0, phi, model, prof, sc.get_float("T", 1.0),
                             count=sc.get_int("count", 8),
                             radius=sc.get_float("radius", 5e-2))
    write_json(out / "summary.json", {
        "midpoint_error": _fmt(res.midpoint_error),
        "terminal_error": _fmt(res.terminal_error),
        "phase1_duration": _fmt(res.plan.total_duration),
        "phase1_segments": len(res.plan.schedule.segments),
        "local_converged": res.local.converged,
    })
    write_json(out / "schedule.json",
               {"phase1": _schedule_json(res.plan.schedule)})
    return EXIT_OK


def _run_saturation_check(sc: Scenario, out: Path) -> int:
    n_max = sc.get_int("n_max", 5)
    budget = sc.get_int("budget", 64)
    rows = []
    ok = True
    for n in range(1, n_max + 1):
        cos_t, sin_t = mode_ladder(n, budget_freq=budget)
        from .saturation import TrigPolynomial
        exact = (cos_t.evaluate() == TrigPolynomial.cos(n)
                 and sin_t.evaluate() == TrigPolynomial.sin(n))
        ok = ok and exact
        rows.append((n, max(cos_t.depth, sin_t.depth),
                     cos_t.node_count() + sin_t.node_count(), int(exact)))
    write_csv(out / "derivation.csv", ["n", "depth", "node_count", "exact"], rows)
    write_json(out / "summary.json", {"n_max": n_max, "all_exact": ok})
    return EXIT_OK if ok else EXIT_ACCEPTANCE


_SUBCOMMANDS = {
    "simulate": _run_simulate,
    "conjugate-limit": _run_conjugate_limit,
    "synthesize": _run_synthesize,
    "steer": _run_steer,
    "moment-control": _run_moment_control,
    "local-exact": _run_local_exact,
    "global-pipeline": _run_global_pipeline,
    "saturation-check": _run_saturation_check,
}


def _run_sweep_point(args) -> int:
    subcommand, values, outdir = args
    sc = Scenario(subcommand, values)
    return run_scenario(sc, Path(outdir))


def run_scenario(scenario: Scenario, outdir: Path) -> int:
    """Dispatch a scenario; a ``sweep = key:v1,v2,...`` axis fans out into
    indexed subdirectories (worker pool when ``workers > 1``), with an
    order-stable sweep_summary.csv."""
    outdir.mkdir(parents=True, exist_ok=True)
    write_manifest(outdir, scenario)
    sweep = scenario.get("sweep")
    if not sweep:
        return _SUBCOMMANDS[scenario.subcommand](scenario, outdir)
    if ":" not in sweep:
        raise ConfigError("sweep must be key:v1,v2,...")
    key, raw_vals = sweep.split(":", 1)
    key = key.strip()
    vals = [v.strip() for v in raw_vals.split(",") if v.strip()]
    if not vals:
        raise ConfigError("sweep has no values")
    jobs = []
    for i, v in enumerate(vals):
        sub_values = dict(scenario.values)
        sub_values.pop("sweep")
        sub_values[key] = v
        jobs.append((scenario.subcommand, sub_values, str(outdir / f"sweep_{i:03d}")))
    workers = scenario.get_int("workers", 1)
    if workers > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_run_sweep_point, jobs))
    else:
        codes = [_run_sweep_point(j) for j in jobs]
    write_csv(outdir / "sweep_summary.csv", ["index", key, "exit_code"],
              [(i, v, c) for i, (v, c) in enumerate(zip(vals, codes))])
    return max(codes) if codes else EXIT_OK


_SCHEMA_DOC = """\
output schemas per subcommand:
  simulate          trajectory.csv (t,k,re,im); summary.json
  conjugate-limit   errors.csv (delta,error); summary.json
  synthesize        plan.json (segments, stages, errors)
  steer             plan.json
  moment-control    control_<i>.csv (t,p4[,p5]); cost.csv (T,inv_T,control_norm);
                    summary.json (norms, defect, residual, certificates)
  local-exact       iterations.csv (sweep,update_norm,ratio,weighted_v,weighted_f);
                    summary.json
  global-pipeline   schedule.json; summary.json
  saturation-check  derivation.csv (n,depth,node_count,exact); summary.json
every run writes manifest.json; 'sweep=key:v1,v2,...' fans a scenario out
into sweep_<i>/ subdirectories plus sweep_summary.csv.
exit codes: 0 pass, 2 config error, 3 numeric failure, 4 acceptance failure.
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusctrl",
        description="Bilinear-control laboratory for fourth-order parabolic "
                    "PDEs on the torus.",
        epilog=_SCHEMA_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--config", type=Path, default=None,
                        help="plain-text key = value configuration file")
    parser.add_argument("--out", type=Path, default=Path("runs/out"),
                        help="output directory for artifacts")
    args, extra = parser.parse_known_args(argv)
    args.overrides = extra

    try:
        values: dict[str, str] = {}
        if args.config is not None:
            values.update(parse_config(args.config.read_text()))
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, val = item.split("=", 1)
            values[key.strip()] = val.strip()
        scenario = Scenario(args.subcommand, values)
        scenario.model()  # validate early
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return run_scenario(scenario, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TorusCtrlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
