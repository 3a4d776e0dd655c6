"""Command-line front end: ``anosov <command> [options]``.

Every command produces one JSON document (the canonical output) that embeds
the resolved run configuration and the library version; tabular commands
can also write a CSV projection.  With ``--out DIR`` files are written to
``DIR/<command>.json`` (and ``.csv``); otherwise the JSON goes to stdout.

Exit codes: 0 success, 2 validation error, 3 mathematical failure (empty
sample, failed ping-pong), 4 resource cap.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__, dynamics, lie, modules
from . import domains as dom
from .errors import AnosovError, InvalidParams, NotProximal, ValidationError
from .numlin import DEFAULT_TOL

N_EQUIVARIANCE_WORDS = 20
EQUIVARIANCE_LENGTH = 4


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _load_rep(spec, realization="standard"):
    """Representation from a path or a bundled fixture name, then realized."""
    path = spec
    if not os.path.exists(path):
        name = spec if spec.endswith(".json") else spec + ".json"
        fixture = dynamics.fixture_path(name)
        if not fixture.is_file():
            raise ValidationError(f"no representation file or bundled fixture named {spec!r}")
        path = str(fixture)
    rep = dynamics.load_representation(path)
    if realization == "standard":
        return rep
    if rep.n != 2:
        raise ValidationError(f"realization {realization!r} needs an SL(2, R) representation")
    if realization == "adjoint":
        return dynamics.adjoint_realization(rep)
    if realization.startswith("principal"):
        try:
            n = int(realization.split(":", 1)[1])
        except (IndexError, ValueError):
            raise ValidationError("principal realization is written principal:N") from None
        return dynamics.principal_image(rep, n)
    raise ValidationError(f"unknown realization {realization!r}")


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(args, payload, csvs=None):
    doc = {"command": args.command, "version": __version__, "config": _config(args), "result": payload}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return
    os.makedirs(args.out, exist_ok=True)
    if args.format in ("json", "both"):
        with open(os.path.join(args.out, f"{args.command}.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.format in ("csv", "both"):
        for suffix, rows in (csvs or {}).items():
            name = f"{args.command}{suffix}.csv"
            with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
                fh.write(_csv_text(rows))


def _require_seed(args):
    if args.seed is None:
        raise InvalidParams(f"{args.command} is stochastic: --seed is required")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_weyl(args):
    rs = lie.build_root_system(args.family, args.rank)
    elements = lie.weyl_enumerate(rs)
    w0 = lie.longest_element(rs)
    iota = lie.opposition_involution(rs)
    payload = {
        "root_system": rs.to_json(),
        "order": len(elements),
        "elements": [list(w.word) for w in elements],
        "longest_element": w0.to_json(),
        "w0_length": w0.length,
        "opposition_involution": {str(k): v for k, v in sorted(iota.items())},
        "iota_is_identity": all(k == v for k, v in iota.items()),
        "rho": rs.rho.to_json(),
    }
    _emit(args, payload, {"": [["length", "word"]] + [[w.length, " ".join(map(str, w.word))] for w in elements]})


def cmd_sphi(args):
    fam = modules.ModuleFamily(args.module, n=args.n, k=args.k, p=args.p, q=args.q)
    sphi = modules.s_phi(fam)
    cert = modules.nonemptiness_certificate(sphi, vcd=args.vcd)
    payload = {
        "module": fam.to_json(),
        "s_phi": sphi.to_json(),
        "certificate": cert.to_json(),
        "w0_excluded": cert.w0_excluded,
    }
    _emit(args, payload, {"": [["word"]] + [[" ".join(map(str, w.word))] for w in sphi.members]})


def _ping_pong(rep, force):
    """Ping-pong certificate for Schottky-type inputs (raises PingPongFailed)."""
    if force or rep.provenance.get("construction") in ("schottky_sl2",):
        if rep.n == 2:
            return dynamics.ping_pong_certificate(rep).to_json()
    return None


def cmd_scan(args):
    rep = _load_rep(args.rep, args.realization)
    pp = _ping_pong(_load_rep(args.rep), args.ping_pong) if args.realization == "standard" else None
    report = dynamics.divergence_scan(rep, args.roots, args.L, args.slope_min, args.fit_from, args.cap)
    payload = {"representation": rep.to_json(), "ping_pong": pp, "scan": report.to_json()}
    _emit(args, payload, {"": report.csv_rows()})


def cmd_qi(args):
    rep = _load_rep(args.rep, args.realization)
    report = dynamics.qi_constants(rep, args.L, args.slope_min, args.cap)
    rows = [["length", "norm_min", "norm_max"]] + [
        [length, lo, hi] for length, lo, hi in zip(report.lengths, report.env_min, report.env_max)
    ]
    _emit(args, {"representation": rep.to_json(), "qi": report.to_json()}, {"": rows})


def cmd_prox(args):
    _require_seed(args)
    rep = _load_rep(args.rep, args.realization)
    form = rep.form
    if args.word:
        words = [dynamics.ReducedWord(tuple(int(c) for c in args.word.replace(",", " ").split()))]
    else:
        words = list(dynamics.enumerate_reduced_words(len(rep.generators), args.L, cap=args.cap))
    entries, rows = [], [["word", "proximal", "gap", "r", "epsilon"]]
    min_r = np.inf
    for w in words:
        label = w.label(rep.labels)
        try:
            pr = dynamics.proximal_data(rep.compound(w), args.flag_type, form,
                                        estimate_epsilon=not args.no_epsilon, seed=args.seed)
        except NotProximal as exc:
            entries.append({"word": list(w.letters), "label": label, "proximal": False, "reason": str(exc)})
            rows.append([label, False, "", "", ""])
            continue
        min_r = min(min_r, pr.r)
        entries.append({"word": list(w.letters), "label": label, "proximal": True,
                        "cyclically_reduced": w.is_cyclically_reduced(), **pr.to_json()})
        rows.append([label, True, pr.gap, pr.r, pr.epsilon])
    payload = {
        "words": len(words),
        "proximal": sum(1 for e in entries if e["proximal"]),
        "min_r": None if not np.isfinite(min_r) else float(min_r),
        "entries": entries,
    }
    _emit(args, payload, {"": rows})


def _limit_set(args, rep):
    flagtype = "line" if args.flag_index == 0 else "maximal_isotropic"
    return dynamics.limit_set_sample(rep, args.L, flagtype, rep.form)


def cmd_limitset(args):
    rep = _load_rep(args.rep, args.realization)
    sample = _limit_set(args, rep)
    margin = dynamics.transversality_margin(sample, rep.form, args.sep)
    payload = {"representation": rep.to_json(), "sample": sample.to_json(), "margin": margin.to_json()}
    _emit(args, payload, {"": sample.csv_rows()})


def _random_words(k, rng, count, max_len):
    pool = list(dynamics.enumerate_reduced_words(k, max_len))
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return [pool[i] for i in sorted(idx)]


def cmd_domain(args):
    _require_seed(args)
    rep = _load_rep(args.rep, args.realization)
    sample = _limit_set(args, rep)
    ref = dom.LimitSetSampleRef.from_dynamics(sample)
    report = dom.domain_sample(ref, args.trials, args.seed, args.tol, args.threads)
    # independent stream for the equivariance words and the exact member
    rng = np.random.default_rng([args.seed, 1])
    words = _random_words(len(rep.generators), rng, N_EQUIVARIANCE_WORDS, EQUIVARIANCE_LENGTH)
    queries = {"member": dom.incident_point(ref.opposite_kind, ref.points[0], rng, ref.form)}
    if report.example_non_member is not None:
        queries["non_member"] = report.example_non_member
    checks = {name: dom.equivariance_check(ref, rep, x, words, pushed=True, tol=args.tol)
              for name, x in queries.items()}
    equiv = {
        "words": [w.label(rep.labels) for w in words],
        "checks": {name: c.to_json(rep.labels) for name, c in checks.items()},
        "violations": sum(len(c.violations) for c in checks.values()),
    }
    payload = {
        "representation": rep.to_json(),
        "flag_type": ref.flag_type,
        "query_kind": ref.opposite_kind,
        "domain": report.to_json(),
        "equivariance": equiv,
    }
    _emit(args, payload, {"": report.csv_rows(), "_limitset": sample.csv_rows()})


def cmd_codim(args):
    if args.schubert:
        if args.n is None or args.k is None:
            raise InvalidParams("--schubert needs --n and --k")
        value, (s, u) = dom.schubert_codim_min(args.n, args.k)
        payload = {"schubert_codim_min": value, "argmin": {"s": s, "u": u}}
        rows = [["n", "k", "codim", "s", "u"], [args.n, args.k, value, s, u]]
    else:
        if args.family is None or args.vcd is None:
            raise InvalidParams("codim needs --family and --vcd (or --schubert)")
        delta = dom.codim_delta(args.family, args.vcd, p=args.p, q=args.q, n=args.n, m=args.m)
        payload = {"family": args.family, "delta": delta, "nonempty_bound": delta > 0}
        rows = [["family", "vcd", "delta"], [args.family, args.vcd, delta]]
    _emit(args, payload, {"": rows})


def cmd_signature(args):
    payload = {}
    rows = [["quantity", "value"]]
    if args.p is not None or args.q is not None:
        if args.p is None or args.q is None:
            raise InvalidParams("signature needs both --p and --q")
        fam = modules.ModuleFamily("WedgeTwoOrth", p=args.p, q=args.q)
        pos, neg, null = modules.v0_signature(fam)
        gram = modules.v0_gram(args.p, args.q)
        margin = float(np.min(np.abs(np.linalg.eigvalsh(gram))))
        payload["v0"] = {"p": args.p, "q": args.q, "signature": [pos, neg, null], "eigenvalue_margin": margin}
        rows.append(["v0_signature", f"{pos},{neg},{null}"])
    if args.wedge_n is not None:
        mat = modules.wedge_pairing_form(args.wedge_n)
        sym = float(np.max(np.abs(mat - mat.T)))
        anti = float(np.max(np.abs(mat + mat.T)))
        kind = "symmetric" if sym <= 1e-12 else "antisymmetric" if anti <= 1e-12 else "neither"
        payload["wedge_form"] = {"n": args.wedge_n, "kind": kind, "symmetry_defect": sym,
                                 "antisymmetry_defect": anti}
        rows.append(["wedge_form", kind])
    if not payload:
        raise InvalidParams("signature needs --p/--q or --wedge-n")
    _emit(args, payload, {"": rows})


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--out", default=None, help="output directory (default: JSON to stdout)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL)
    p.add_argument("--threads", type=_positive(int), default=1)
    p.add_argument("--format", choices=("json", "csv", "both"), default="json")


def _rep_args(p, L=8):
    p.add_argument("--rep", default="schottky_k2_t3", help="representation file or bundled fixture name")
    p.add_argument("--realization", default="standard", help="standard, adjoint or principal:N")
    p.add_argument("--L", type=_positive(int), default=L)
    p.add_argument("--cap", type=_positive(int), default=int(dynamics.WORD_CAP))


def build_parser():
    parser = argparse.ArgumentParser(prog="anosov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"anosov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weyl", help="root system, Weyl group, w0 and opposition involution")
    p.add_argument("--family", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("sphi", help="S_phi and the nonemptiness certificate of a module family")
    p.add_argument("--module", required=True, choices=modules.TAGS)
    for name in ("n", "k", "p", "q"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--vcd", type=int, default=1)
    p.set_defaults(func=cmd_sphi)

    p = sub.add_parser("scan", help="divergence scan of root functionals of the Cartan projection")
    _rep_args(p)
    p.add_argument("--roots", nargs="*", default=None, help='e.g. "mu1-mu2" (default: simple roots)')
    p.add_argument("--slope-min", type=_positive(float), default=dynamics.SLOPE_MIN)
    p.add_argument("--fit-from", type=int, default=None)
    p.add_argument("--ping-pong", action="store_true", help="always run the ping-pong certificate")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("qi", help="quasi-isometry constants from the Cartan-norm envelopes")
    _rep_args(p)
    p.add_argument("--slope-min", type=_positive(float), default=dynamics.SLOPE_MIN)
    p.set_defaults(func=cmd_qi)

    p = sub.add_parser("prox", help="proximality data of reduced words")
    _rep_args(p, L=6)
    p.add_argument("--word", default=None, help="signed 1-based letters, e.g. '1 -2 1'")
    p.add_argument("--flag-type", choices=("line", "maximal_isotropic"), default="line")
    p.add_argument("--no-epsilon", action="store_true")
    p.set_defaults(func=cmd_prox)

    p = sub.add_parser("limitset", help="limit-set sample and transversality margin")
    _rep_args(p)
    p.add_argument("--flag-index", type=int, choices=(0, 1), default=0)
    p.add_argument("--sep", type=_positive(float), default=dynamics.SEP_DEFAULT)
    p.set_defaults(func=cmd_limitset)

    p = sub.add_parser("domain", help="Monte-Carlo domain fraction and equivariance check")
    _rep_args(p)
    p.add_argument("--flag-index", type=int, choices=(0, 1), default=0)
    p.add_argument("--trials", type=_positive(int), default=10_000)
    p.set_defaults(func=cmd_domain)

    p = sub.add_parser("codim", help="codimension bounds")
    p.add_argument("--family", choices=dom.GROUP_FAMILIES, default=None)
    p.add_argument("--vcd", type=int, default=None)
    for name in ("p", "q", "n", "m", "k"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--schubert", action="store_true", help="minimum Schubert codimension for (n, k)")
    p.set_defaults(func=cmd_codim)

    p = sub.add_parser("signature", help="signature of the form on V0 and wedge-form parity")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--wedge-n", type=int, default=None)
    p.set_defaults(func=cmd_signature)

    for action in sub.choices.values():
        _common(action)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except AnosovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
