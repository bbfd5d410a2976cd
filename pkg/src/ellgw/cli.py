"""Command-line surface.

Subcommands: ``stationary`` (connected series, optional quasimodular
decomposition), ``potential`` (genus potential monomial tables), ``verify``
(identity suites with per-identity pass/fail), and ``selftest`` (the full
acceptance suite at pinned truncations).

Output is deterministic: JSON with sorted keys and rationals as
``[numerator, denominator]`` pairs in lowest terms (byte-identical for
identical job configs), a flat CSV coefficient table, or a human-readable
text rendering.  Exit codes: 0 all checks pass / computation complete,
1 mathematical inconsistency, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time

from gmpy2 import mpq

from . import __version__, acceptance, hierarchy, potential, stationary
from .algebra import SeriesError, TruncatedSeries, rational_parts
from .supercommutative import monomial_degree

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _pair(x) -> list[int]:
    n, d = rational_parts(x)
    return [n, d]


def series_payload(series: TruncatedSeries) -> dict:
    coefficients = []
    for key in sorted(series.coeffs):
        n, d = rational_parts(series.coeffs[key])
        index = key[0] if len(key) == 1 else list(key)
        coefficients.append([index, n, d])
    return {"order": series.order, "coefficients": coefficients}


def payload_series(payload: dict, q_order=None):
    from .algebra import qring
    ring = qring(payload["order"] if q_order is None else q_order)
    return ring.series({(int(i),): mpq(n, d) for i, n, d in payload["coefficients"]},
                       order=payload["order"])


def monomial_label(key) -> str:
    evens, odds = key
    parts = ["t%d_%d^%d" % (v.alpha, v.level, e) if e > 1 else
             "t%d_%d" % (v.alpha, v.level) for v, e in evens]
    parts += ["t%d_%d" % (v.alpha, v.level) for v in odds]
    return "*".join(parts) or "1"


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n"


def render_csv(document: dict) -> str:
    lines = []
    payload = document["payload"]
    if "series" in payload:
        lines.append("exponent,numerator,denominator")
        for index, n, d in payload["series"]["coefficients"]:
            lines.append("%s,%d,%d" % (index, n, d))
    if "quasimodular" in payload:
        lines.append("E2_power,E4_power,E6_power,numerator,denominator")
        for (a, b, c), (n, d) in payload["quasimodular"]["terms"]:
            lines.append("%d,%d,%d,%d,%d" % (a, b, c, n, d))
    if "monomials" in payload:
        lines.append("monomial,q_exponent,numerator,denominator")
        for row in payload["monomials"]:
            for index, n, d in row["series"]["coefficients"]:
                lines.append("%s,%s,%d,%d" % (row["monomial"], index, n, d))
    if "identities" in payload:
        lines.append("identity,status,offending")
        for row in payload["identities"]:
            lines.append("%s,%s,%s" % (row["name"],
                                       "pass" if row["pass"] else "fail",
                                       row.get("offending") or ""))
    return "\n".join(lines) + "\n"


def _format_rational(n: int, d: int) -> str:
    return str(n) if d == 1 else "%d/%d" % (n, d)


def render_text(document: dict) -> str:
    lines = ["# %s (ellgw %s)" % (document["command"], document["version"])]
    for key in sorted(document["config"]):
        lines.append("#   %s = %r" % (key, document["config"][key]))
    payload = document["payload"]
    if "series" in payload:
        terms = []
        for index, n, d in payload["series"]["coefficients"]:
            c = _format_rational(n, d)
            terms.append(c if index == 0 else "(%s) q^%s" % (c, index))
        lines.append(" + ".join(terms) if terms else "0")
        lines.append("  (+ O(q^%d))" % (payload["series"]["order"] + 1))
    if "quasimodular" in payload:
        terms = []
        for (a, b, c), (n, d) in payload["quasimodular"]["terms"]:
            label = "".join(s for s, e in (("E2^%d" % a, a), ("E4^%d" % b, b),
                                           ("E6^%d" % c, c)) if e) or "1"
            terms.append("(%s) %s" % (_format_rational(n, d), label))
        lines.append("weight %d: %s" % (payload["quasimodular"]["weight"],
                                        " + ".join(terms) or "0"))
    if "monomials" in payload:
        for row in payload["monomials"]:
            terms = ["(%s) q^%s" % (_format_rational(n, d), i)
                     for i, n, d in row["series"]["coefficients"]]
            lines.append("%s : %s" % (row["monomial"], " + ".join(terms) or "0"))
    if "identities" in payload:
        for row in payload["identities"]:
            status = "pass" if row["pass"] else "FAIL"
            suffix = ""
            if row.get("offending"):
                suffix = "  offending monomial: %s" % row["offending"]
            if row.get("note"):
                suffix += "  [%s]" % row["note"]
            lines.append("%-46s %s%s" % (row["name"], status, suffix))
    return "\n".join(lines) + "\n"


def render(document: dict, fmt: str) -> str:
    if fmt == "json":
        return canonical_json(document)
    if fmt == "csv":
        return render_csv(document)
    if fmt == "text":
        return render_text(document)
    raise ConfigError("unknown format %r" % fmt)


def write_output(text: str, path: str | None):
    """Write atomically so partial documents never land on disk."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def parse_profile(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return stationary.check_profile(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError("bad profile %r: %s" % (text, exc))


def read_config_file(path: str) -> dict:
    """Optional flat key=value defaults; explicit flags win."""
    out = {}
    with open(path) as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("bad config line %r" % raw.strip())
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def cache_directory() -> str:
    env = os.environ.get("ELLGW_CACHE_DIR")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "ellgw")


def _cache_path(config: dict) -> str:
    digest = hashlib.sha256(canonical_json(
        {"config": config, "version": __version__}).encode()).hexdigest()
    return os.path.join(cache_directory(), digest[:24] + ".json")


def document(command: str, config: dict, payload: dict) -> dict:
    return {"command": command, "config": config, "version": __version__,
            "payload": payload}


# ---------------------------------------------------------------------------
# subcommands


def cmd_stationary(args) -> int:
    profile = parse_profile(args.profile)
    if len(profile) > stationary.HARD_MAX_POINTS:
        raise ConfigError("profiles support at most %d points"
                          % stationary.HARD_MAX_POINTS)
    config = {"profile": list(profile), "q_order": args.q_order,
              "quasimodular": bool(args.quasimodular)}
    cache_file = _cache_path(config)
    doc = None
    if not args.no_cache and os.path.exists(cache_file):
        with open(cache_file) as handle:
            doc = json.load(handle)
    if doc is None:
        series = stationary.connected_series(profile, args.q_order)
        payload = {"series": series_payload(series)}
        if args.quasimodular:
            if any(d < 0 for d in profile):
                raise ConfigError("--quasimodular needs a non-negative profile")
            weight = sum(d + 2 for d in profile)
            form = stationary.quasimodular_decompose(series, weight, args.q_order)
            payload["quasimodular"] = {
                "weight": weight,
                "terms": [[list(monomial), _pair(value)]
                          for monomial, value in form.items()],
            }
        doc = document("stationary", config, payload)
        if not args.no_cache:
            write_output(canonical_json(doc), cache_file)
    write_output(render(doc, args.format), args.output)
    return EXIT_OK


def cmd_potential(args) -> int:
    if args.genus > 3:
        raise ConfigError("genus potentials are supported for g <= 3")
    config = {"genus": args.genus, "max_degree": args.max_degree,
              "max_level": args.max_level, "q_order": args.q_order}
    workspace = potential.PotentialWorkspace(
        max_degree=args.max_degree, max_level=args.max_level,
        q_order=args.q_order, genus_max=max(args.genus, 1), k_max=0)
    body = workspace.genus_potential(args.genus).body
    window = potential.Window(args.max_degree, args.max_level, args.q_order)
    body = potential.restrict_to_window(body, window)
    rows = [{"monomial": monomial_label(key), "series": series_payload(value)}
            for key, value in body.items()]
    rows.sort(key=lambda row: row["monomial"])
    doc = document("potential", config, {"monomials": rows})
    write_output(render(doc, args.format), args.output)
    return EXIT_OK


def _verify_virasoro(args, identities):
    ws = potential.PotentialWorkspace(
        max_degree=args.max_degree, max_level=args.max_level,
        q_order=args.q_order, genus_max=max(args.genus_list), k_max=max(args.k_list))
    for g in args.genus_list:
        for k in args.k_list:
            for kind in ("L", "D", "Dbar"):
                residual, window = ws.virasoro_residual(kind, k, g)
                row = {"name": "%s_%d F_%d" % (kind, k, g)}
                violation = potential.first_violation(residual, window)
                if violation is None:
                    row["pass"] = True
                elif kind in ("D", "Dbar") and k == -1 and g == 0:
                    shadow = potential.unstable_constraint_shadow(kind, residual.algebra)
                    exact = potential.first_violation(residual - shadow, window) is None
                    row["pass"] = False
                    row["offending"] = monomial_label(violation[0])
                    row["note"] = ("residual equals the unstable genus-0 shadow "
                                   "exactly" if exact else "unexpected residual")
                else:
                    row["pass"] = False
                    row["offending"] = monomial_label(violation[0])
                identities.append(row)
        for d in range(0, args.max_level + 1):
            residual, window = ws.v4_divisor_residual(d)
            violation = potential.first_violation(residual, window)
            identities.append({"name": "O v4_%d = delta_{%d,0}" % (d, d),
                               "pass": violation is None,
                               "offending": None if violation is None
                               else monomial_label(violation[0])})
        break  # v4 rows are genus-independent


def _verify_divisor(args, identities):
    ws = potential.PotentialWorkspace(
        max_degree=args.max_degree, max_level=args.max_level,
        q_order=args.q_order, genus_max=max(args.genus_list), k_max=0)
    for g in args.genus_list:
        residual, window = ws.divisor_residual(g)
        violation = potential.first_violation(residual, window)
        identities.append({"name": "divisor identity, genus %d" % g,
                           "pass": violation is None,
                           "offending": None if violation is None
                           else monomial_label(violation[0])})


def _verify_hierarchy(args, identities):
    ws = potential.PotentialWorkspace(
        max_degree=args.max_degree, max_level=max(args.max_level, 2),
        q_order=args.q_order, genus_max=1, k_max=0)
    problems = acceptance.hierarchy_consistency(ws)
    identities.append({"name": "flow table matches the genus-0 potential",
                       "pass": not problems,
                       "offending": problems[0] if problems else None})
    problems = acceptance.hierarchy_commutators()
    identities.append({"name": "flow commutators vanish (b, c <= 2)",
                       "pass": not problems,
                       "offending": problems[0] if problems else None})


def _verify_miura(args, identities):
    ws = potential.PotentialWorkspace(
        max_degree=args.max_degree, max_level=args.max_level,
        q_order=args.q_order, genus_max=1, k_max=0)
    residual, window = acceptance.miura_residual(ws)
    violation = potential.first_violation(residual, window)
    identities.append({"name": "Miura eps^2 term matches d2F_1",
                       "pass": violation is None,
                       "offending": None if violation is None
                       else monomial_label(violation[0])})


def _verify_roundtrip(args, identities):
    from .combinatorics import set_partitions
    profiles = [parse_profile(args.profile)] if args.profile is not None \
        else acceptance.roundtrip_profiles()
    inv = stationary.euler_inverse(args.q_order)
    for profile in profiles:
        if not profile:
            continue
        disc = stationary.disconnected_series(profile, args.q_order)
        acc = None
        for blocks in set_partitions(len(profile)):
            prod = None
            for block in blocks:
                sub = stationary.connected_series(
                    tuple(profile[i] for i in block), args.q_order)
                prod = sub if prod is None else prod * sub
            acc = prod if acc is None else acc + prod
        identities.append({"name": "round trip %r" % (profile,),
                           "pass": disc == inv * acc})


def cmd_verify(args) -> int:
    args.genus_list = [args.genus] if args.genus is not None else [0, 1, 2]
    args.k_list = [args.k] if args.k is not None else [-1, 0, 1, 2, 3]
    identities: list = []
    runner = {"virasoro": _verify_virasoro, "divisor": _verify_divisor,
              "hierarchy": _verify_hierarchy, "miura": _verify_miura,
              "roundtrip": _verify_roundtrip}[args.suite]
    runner(args, identities)
    all_pass = all(row["pass"] for row in identities)
    config = {"suite": args.suite, "genus": args.genus, "k": args.k,
              "profile": args.profile, "q_order": args.q_order,
              "max_degree": args.max_degree, "max_level": args.max_level}
    doc = document("verify", config, {"identities": identities,
                                      "all_pass": all_pass})
    write_output(render(doc, args.format), args.output)
    return EXIT_OK if all_pass else EXIT_INCONSISTENT


def cmd_selftest(args) -> int:
    extended = args.extended or acceptance.extended_enabled()
    t0 = time.time()
    results, ok = acceptance.run_acceptance(extended=extended,
                                            emit=lambda s: print(s, file=sys.stderr))
    identities = [{"name": r.name, "pass": r.passed, "offending": r.detail or None,
                   "note": "; ".join(r.notes) or None} for r in results]
    doc = document("selftest", {"extended": extended},
                   {"identities": identities, "all_pass": ok})
    write_output(render(doc, args.format), args.output)
    print("selftest finished in %.1fs" % (time.time() - t0), file=sys.stderr)
    return EXIT_OK if ok else EXIT_INCONSISTENT


# ---------------------------------------------------------------------------
# argument plumbing

_DEFAULTS = {"q_order": 6, "max_degree": 5, "max_level": 4, "format": "json"}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--format", choices=("json", "csv", "text"), default=None)
    parser.add_argument("--output", default=None, help="output path (default stdout)")
    parser.add_argument("--config", default=None,
                        help="flat key=value defaults; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ellgw",
        description="Exact Gromov-Witten invariants of an elliptic curve")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stationary", help="connected stationary series C_d(q)")
    p.add_argument("--profile", required=True,
                   help="comma-separated descendant levels; empty for ()")
    p.add_argument("--q-order", dest="q_order", type=int, default=None)
    p.add_argument("--quasimodular", action="store_true")
    p.add_argument("--no-cache", action="store_true")
    _add_common(p)
    p.set_defaults(run=cmd_stationary)

    p = sub.add_parser("potential", help="genus potential monomial table")
    p.add_argument("--genus", type=int, required=True)
    p.add_argument("--q-order", dest="q_order", type=int, default=None)
    p.add_argument("--max-degree", dest="max_degree", type=int, default=None)
    p.add_argument("--max-level", dest="max_level", type=int, default=None)
    _add_common(p)
    p.set_defaults(run=cmd_potential)

    p = sub.add_parser("verify", help="run an identity suite")
    p.add_argument("suite", choices=("virasoro", "divisor", "hierarchy",
                                     "miura", "roundtrip"))
    p.add_argument("--genus", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--profile", default=None)
    p.add_argument("--q-order", dest="q_order", type=int, default=None)
    p.add_argument("--max-degree", dest="max_degree", type=int, default=None)
    p.add_argument("--max-level", dest="max_level", type=int, default=None)
    _add_common(p)
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--extended", action="store_true",
                   help="include the expensive genus-3 spot checks")
    _add_common(p)
    p.set_defaults(run=cmd_selftest)
    return parser


def _apply_config_defaults(args):
    """Precedence: explicit flag > config file > built-in default."""
    file_values = read_config_file(args.config) if args.config else {}
    for key, default in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            if key in file_values:
                value = file_values[key]
                setattr(args, key, value if key == "format" else int(value))
            else:
                setattr(args, key, default)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_defaults(args)
        return args.run(args)
    except (ConfigError, stationary.ProfileError, FileNotFoundError) as exc:
        print("ellgw: configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (stationary.FinalizationError, stationary.QuasimodularityError) as exc:
        print("ellgw: mathematical inconsistency: %s" % exc, file=sys.stderr)
        return EXIT_INCONSISTENT
    except SeriesError as exc:
        print("ellgw: configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
