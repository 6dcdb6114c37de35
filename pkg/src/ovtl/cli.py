"""Command-line surface tying the modules into reproducible experiments.

Subcommands: gen | norm | verify | decompose | reconstruct | multiplier-check.
Reports are structured text with stable field ordering and explicit
parameter echoes; identical (config, seed) runs produce byte-identical
output files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import generators
from .errors import HypothesisError, OvtlError
from .fieldio import (
    Config,
    load_config,
    read_decomposition_blob,
    read_field,
    write_decomposition,
    write_field,
)
from .lattice import cone_index
from .opfield import OperatorField
from .normsuite import (
    bmo_norm,
    hardy_norm,
    homogeneous_equiv_report,
    tl_infty_norm,
    tl_norm_column,
    tl_norm_mixture,
    tl_norm_row,
)
from .spectral import make_hom_lp_family, make_lp_family

NORM_NAMES = ("F_col", "F_row", "F_mix", "hardy", "bmo", "F_infty")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ovtl", description=__doc__)
    ap.add_argument("--config", type=Path, default=None, help="config file path")
    ap.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--grid", type=int, default=None, help="lattice points per axis N")
    ap.add_argument("--dim", type=int, default=None, help="spatial dimension d")
    ap.add_argument("--matrix", type=int, default=None, help="matrix dimension n")
    ap.add_argument("--alpha", type=float, default=None, help="smoothness index")
    ap.add_argument("--p", type=float, default=None, help="integrability index")
    ap.add_argument("--sigma", type=float, default=None, help="multiplier smoothness")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a field file")
    g.add_argument("--kind", required=True,
                   choices=("single-mode", "band-limited-random", "bump", "haar",
                            "from-file"))
    g.add_argument("--mode", type=str, default=None,
                   help="comma-separated frequency for single-mode")
    g.add_argument("--band", type=str, default=None,
                   help="rmin,rmax annulus for band-limited-random")
    g.add_argument("--source", type=Path, default=None, help="input for from-file")
    g.add_argument("output", type=Path)

    n = sub.add_parser("norm", help="compute norms of a field file")
    n.add_argument("field", type=Path)
    n.add_argument("--which", type=str, default="F_col",
                   help=f"comma list from {NORM_NAMES}")
    n.add_argument("--report", type=Path, default=None)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("suite", choices=("lp-family", "multiplier", "cz", "lifting",
                                     "equivalence", "atoms"))
    v.add_argument("--violate-support", action="store_true",
                   help="multiplier suite only: run a support-violating "
                        "sequence so the hypothesis error surfaces")
    v.add_argument("--report", type=Path, default=None)

    d = sub.add_parser("decompose", help="smooth atomic decomposition")
    d.add_argument("field", type=Path)
    d.add_argument("--target", choices=("h1", "tl"), default="h1")
    d.add_argument("--manifest", type=Path, required=True)
    d.add_argument("--blob", type=Path, required=True)

    r = sub.add_parser("reconstruct", help="rebuild a field from manifest + blob")
    r.add_argument("--manifest", type=Path, required=True)
    r.add_argument("--blob", type=Path, required=True)
    r.add_argument("output", type=Path)

    m = sub.add_parser("multiplier-check", help="empirical multiplier certificates")
    m.add_argument("--family", choices=("identity", "bessel"), default="bessel")
    m.add_argument("--beta", type=float, default=1.0)
    m.add_argument("--conic", action="store_true")
    m.add_argument("--report", type=Path, default=None)
    return ap


def _load_cfg(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.dim is not None:
        cfg.d = args.dim
    if args.grid is not None:
        cfg.N = args.grid
    if args.matrix is not None:
        cfg.n = args.matrix
    if args.seed is not None:
        cfg.seed = args.seed
    if args.sigma is not None:
        cfg.sigma = args.sigma
    if args.alpha is not None:
        cfg.alphas = (args.alpha,)
    if args.p is not None:
        cfg.ps = (args.p,)
    if args.out is not None:
        cfg.out_dir = str(args.out)
    return cfg


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(cfg: Config, args) -> int:
    grid = cfg.grid()
    kind = args.kind
    if kind == "single-mode":
        k = tuple(int(x) for x in (args.mode or "4").split(","))
        while len(k) < grid.d:
            k = k + (0,)
        f = generators.single_mode(grid, cfg.n, k)
    elif kind == "band-limited-random":
        if args.band:
            r_min, r_max = (float(x) for x in args.band.split(","))
        else:
            r_min, r_max = 0.0, None
        f = generators.band_limited_random(grid, cfg.n, cfg.seed, r_min=r_min,
                                           r_max=r_max)
    elif kind == "bump":
        f = generators.bump(grid, cfg.n, seed=cfg.seed)
    elif kind == "haar":
        f = generators.haar(grid, cfg.n)
    elif kind == "from-file":
        if args.source is None:
            raise OvtlError("from-file requires --source")
        f = read_field(args.source)
    else:  # pragma: no cover
        raise OvtlError(f"unknown kind {kind}")
    write_field(args.output, f)
    return 0


def cmd_norm(cfg: Config, args) -> int:
    f = read_field(args.field)
    if not isinstance(f, OperatorField):
        raise OvtlError("norm command expects a plain field (j_count = 0)")
    fam = make_lp_family(f.grid)
    which = [w.strip() for w in args.which.split(",")]
    reports = []
    for name in which:
        for alpha in cfg.alphas:
            for p in cfg.ps:
                if name == "F_col":
                    reports.append(tl_norm_column(f, alpha, p, fam, seed=cfg.seed))
                elif name == "F_row":
                    reports.append(tl_norm_row(f, alpha, p, fam, seed=cfg.seed))
                elif name == "F_mix":
                    reports.append(tl_norm_mixture(f, alpha, p, fam, seed=cfg.seed))
                elif name == "hardy":
                    reports.append(hardy_norm(f, p, mode=cfg.kernel_mode
                                              if cfg.kernel_mode in ("lp", "poisson")
                                              else "lp", family=fam, seed=cfg.seed))
                elif name == "bmo":
                    reports.append(bmo_norm(f, seed=cfg.seed))
                elif name == "F_infty":
                    reports.append(tl_infty_norm(f, alpha, fam, seed=cfg.seed))
                else:
                    raise OvtlError(f"unknown norm name {name!r}")
                if name in ("bmo",):
                    break
            if name in ("bmo",):
                break
    _emit("\n".join(r.to_text() for r in reports), args.report)
    return 0


def _suite_lp_family(cfg: Config, lines: list) -> bool:
    grid = cfg.grid()
    ok = True
    for kind in ("default", "poly"):
        fam = make_lp_family(grid, kind)
        part = fam.partition_sum()
        cov = fam.covered_mask()
        err = float(np.max(np.abs(part[cov] - 1.0)))
        lines.append(f"partition_defect[{kind}] = {err:.3e}")
        ok &= err <= 1e-13
        rng_ok = all(
            float(fam.values(j).real.min()) >= -1e-15
            and float(fam.values(j).real.max()) <= 1.0 + 1e-12
            for j in range(fam.j_max + 1)
        )
        lines.append(f"range_ok[{kind}] = {rng_ok}")
        ok &= rng_ok
        r = grid.freq_norm
        supp_ok = True
        for j in range(1, fam.j_max + 1):
            vals = np.abs(fam.values(j))
            outside = (r < 2.0 ** (j - 1) - 1e-12) | (r > 2.0 ** (j + 1) + 1e-12)
            if np.any(outside) and float(np.max(vals[outside])) > 0.0:
                supp_ok = False
        lines.append(f"support_ok[{kind}] = {supp_ok}")
        ok &= supp_ok
    return ok


def _suite_multiplier(cfg: Config, lines: list, violate_support: bool = False) -> bool:
    from .fmult import (
        SymbolSequence,
        bessel_dilate_sequence,
        empirical_square_bound,
        identity_sequence,
    )
    from .spectral import Profile, constant_profile

    grid = cfg.grid()
    sigma = cfg.sigma_value()

    def gen(t, _g=grid):
        return generators.band_limited_random(_g, cfg.n, cfg.seed + t)

    if violate_support:
        gauss = Profile(lambda xi: np.exp(-np.sum(xi**2, axis=-1)) + 0j)
        rho = tuple(gauss for _ in range(4))
        bad = SymbolSequence(grid, tuple(constant_profile(1.0) for _ in rho), rho,
                             name="support-violating")
        empirical_square_bound(bad, gen, alpha=0.0, p=2.0, trials=1, sigma=sigma)
        lines.append("support_violation_undetected = True")
        return False  # reaching here means the violation went unnoticed

    ok = True
    for seq in (identity_sequence(grid), bessel_dilate_sequence(grid, 1.0)):
        cert = empirical_square_bound(seq, gen, alpha=0.0, p=2.0,
                                      trials=cfg.trials, sigma=sigma,
                                      margin=cfg.multiplier_margin)
        lines.append(cert.to_text())
        ok &= cert.passed
    return ok


def _suite_cz(cfg: Config, lines: list) -> bool:
    from .fmult import cz_kernel_estimates, lp_sequence

    grid = cfg.grid()
    sigma = cfg.sigma_value()
    est = cz_kernel_estimates(lp_sequence(grid), grid, sigma)
    r1, r2, r3 = est.ratios()
    lines.append(f"E1 = {est.e1:.6e}")
    lines.append(f"E2 = {est.e2:.6e}")
    lines.append(f"E3 = {est.e3:.6e}")
    lines.append(f"phi_2_sigma = {est.phi_2_sigma:.6e}")
    lines.append(f"ratios = {r1:.4f}, {r2:.4f}, {r3:.4f}")
    lines.append(f"e3_max_shift = {est.e3_max_shift}")
    return all(np.isfinite(x) for x in (est.e1, est.e2, est.e3, est.phi_2_sigma))


def _suite_lifting(cfg: Config, lines: list) -> bool:
    from .spectral import apply_symbol, bessel_symbol

    grid = cfg.grid()
    fam = make_lp_family(grid)
    ok = True
    for t in range(cfg.trials):
        f = generators.band_limited_random(grid, cfg.n, cfg.seed + t)
        beta = 1.0
        jf = apply_symbol(bessel_symbol(grid, beta), f)
        back = apply_symbol(bessel_symbol(grid, -beta), jf)
        err = float(np.max(np.abs(back.data - f.data)) / np.max(np.abs(f.data)))
        ok &= err <= 1e-11
        for alpha in cfg.alphas:
            num = tl_norm_column(jf, alpha - beta, cfg.ps[0], fam).value
            den = tl_norm_column(f, alpha, cfg.ps[0], fam).value
            lines.append(f"lifting_ratio[trial={t},alpha={alpha}] = {num / den:.6f}")
    lines.append(f"roundtrip_ok = {ok}")
    return ok


def _suite_equivalence(cfg: Config, lines: list) -> bool:
    grid = cfg.grid()
    fam_a = make_lp_family(grid, "default")
    fam_b = make_lp_family(grid, "poly")
    hom = make_hom_lp_family(grid)
    ok = True
    for t in range(cfg.trials):
        f = generators.band_limited_random(grid, cfg.n, cfg.seed + t)
        for alpha in cfg.alphas:
            for p in cfg.ps:
                a = tl_norm_column(f, alpha, p, fam_a).value
                b = tl_norm_column(f, alpha, p, fam_b).value
                lines.append(f"phi_independence[t={t},alpha={alpha},p={p}] = {a / b:.6f}")
                if alpha > 0:
                    rep = homogeneous_equiv_report(f, alpha, p, fam_a, hom)
                    lines.append(
                        f"homogeneous[t={t},alpha={alpha},p={p}] = "
                        f"{rep.terms['ratio_phi0_form']:.6f}"
                    )
                ok &= np.isfinite(a / b) and a / b > 0
    return ok


def _suite_atoms(cfg: Config, lines: list) -> bool:
    from .atomics import smooth_decompose_h1, smooth_decompose_tl, validate_atom

    grid = cfg.grid()
    ok = True
    for t in range(max(1, cfg.trials // 2)):
        f = generators.band_limited_random(grid, cfg.n, cfg.seed + t)
        dec = smooth_decompose_h1(f)
        valid = all(validate_atom(a).passed for _, a in dec.low_pairs + dec.high_pairs)
        lines.append(
            f"h1[t={t}]: atoms = {len(dec.low_pairs) + len(dec.high_pairs)} "
            f"residual = {dec.residual:.3e} mass_ratio = {dec.mass_ratio:.4f} "
            f"valid = {valid}"
        )
        ok &= valid and dec.residual <= 1e-9
        alpha = next((a for a in cfg.alphas if a > 0), 0.5)
        dec2 = smooth_decompose_tl(f, alpha, cfg.K, cfg.L)
        valid2 = all(validate_atom(a).passed for _, a in dec2.low_pairs + dec2.high_pairs)
        lines.append(
            f"tl[t={t},alpha={alpha}]: atoms = "
            f"{len(dec2.low_pairs) + len(dec2.high_pairs)} "
            f"residual = {dec2.residual:.3e} mass_ratio = {dec2.mass_ratio:.4f} "
            f"valid = {valid2}"
        )
        ok &= valid2 and dec2.residual <= 1e-9
    return ok


def cmd_verify(cfg: Config, args) -> int:
    lines = [f"[verify:{args.suite}]",
             f"d = {cfg.d}", f"N = {cfg.N}", f"n = {cfg.n}", f"seed = {cfg.seed}"]
    suites = {
        "lp-family": _suite_lp_family,
        "multiplier": _suite_multiplier,
        "cz": _suite_cz,
        "lifting": _suite_lifting,
        "equivalence": _suite_equivalence,
        "atoms": _suite_atoms,
    }
    try:
        if args.suite == "multiplier":
            ok = _suite_multiplier(cfg, lines,
                                   violate_support=getattr(args, "violate_support", False))
        else:
            ok = suites[args.suite](cfg, lines)
    except HypothesisError as exc:
        lines.append(f"hypothesis_error = {exc}")
        ok = False
    lines.append(f"passed = {ok}")
    _emit("\n".join(lines) + "\n", args.report)
    return 0 if ok else 1


def cmd_decompose(cfg: Config, args) -> int:
    from .atomics import smooth_decompose_h1, smooth_decompose_tl

    f = read_field(args.field)
    if not isinstance(f, OperatorField):
        raise OvtlError("decompose expects a plain field")
    if args.target == "h1":
        dec = smooth_decompose_h1(f, K=cfg.K)
    else:
        alpha = cfg.alphas[0]
        dec = smooth_decompose_tl(f, alpha, cfg.K, cfg.L)
    write_decomposition(args.manifest, args.blob, dec)
    return 0


def cmd_reconstruct(cfg: Config, args) -> int:
    f, meta, atoms = read_decomposition_blob(args.blob, args.manifest)
    write_field(args.output, f)
    return 0


def cmd_multiplier_check(cfg: Config, args) -> int:
    from .fmult import (
        bessel_dilate_sequence,
        empirical_conic_bound,
        empirical_square_bound,
        identity_sequence,
    )

    grid = cfg.grid()
    seq = (identity_sequence(grid) if args.family == "identity"
           else bessel_dilate_sequence(grid, args.beta))

    def gen(t):
        return generators.band_limited_random(grid, cfg.n, cfg.seed + t)

    texts = []
    ok = True
    for alpha in cfg.alphas:
        for p in cfg.ps:
            if args.conic:
                cone = cone_index(grid, make_lp_family(grid).j_max)
                cert = empirical_conic_bound(seq, gen, alpha=alpha, p=p, cone=cone,
                                             trials=cfg.trials, sigma=cfg.sigma_value(),
                                             margin=cfg.multiplier_margin)
            else:
                cert = empirical_square_bound(seq, gen, alpha=alpha, p=p,
                                              trials=cfg.trials, sigma=cfg.sigma_value(),
                                              margin=cfg.multiplier_margin)
            texts.append(cert.to_text())
            ok &= cert.passed
    _emit("\n".join(texts), args.report)
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = _load_cfg(args)
    commands = {
        "gen": cmd_gen,
        "norm": cmd_norm,
        "verify": cmd_verify,
        "decompose": cmd_decompose,
        "reconstruct": cmd_reconstruct,
        "multiplier-check": cmd_multiplier_check,
    }
    try:
        return commands[args.command](cfg, args)
    except HypothesisError as exc:
        sys.stderr.write(f"hypothesis error: {exc}\n")
        return 2
    except OvtlError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
