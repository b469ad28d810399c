"""Text persistence for spectra and lattices.

    # circlaw-spectrum v1 n=<n> seed=<seed> replicate=<r>
    <re>,<im>        (n lines, 17 significant digits, spiral order)

Lattice dumps use the same body under ``# circlaw-lattice v1 n=<n> m=<m>``.
"""
from __future__ import annotations

import re

import numpy as np

from .measures import Spectrum
from .spiral import PredictedMeasure, build_reference_measure, spiral_argsort

SPECTRUM_TAG = "circlaw-spectrum"
LATTICE_TAG = "circlaw-lattice"
VERSION = "v1"

_HEADER = re.compile(r"^#\s+(\S+)\s+(\S+)((?:\s+\w+=-?\d+)*)\s*$")


class FormatError(ValueError):
    pass


def _body(points) -> str:
    return "".join(f"{z.real:.17g},{z.imag:.17g}\n" for z in np.asarray(points).tolist())


def _parse(path, tag):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    m = _HEADER.match(lines[0])
    if not m or m.group(1) != tag:
        raise FormatError(f"{path}: not a {tag} file")
    if m.group(2) != VERSION:
        raise FormatError(f"{path}: unsupported version {m.group(2)!r}")
    fields = dict(kv.split("=") for kv in m.group(3).split())
    pts = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            re_s, im_s = line.split(",")
            pts.append(complex(float(re_s), float(im_s)))
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: bad point {line!r}") from exc
    return {k: int(v) for k, v in fields.items()}, np.array(pts, dtype=np.complex128)


def write_spectrum(path, s: Spectrum) -> None:
    ev = s.eigenvalues[spiral_argsort(s.eigenvalues, s.n)]
    with open(path, "w") as fh:
        fh.write(f"# {SPECTRUM_TAG} {VERSION} n={s.n} seed={s.seed} replicate={s.replicate}\n")
        fh.write(_body(ev))


def read_spectrum(path) -> Spectrum:
    fields, pts = _parse(path, SPECTRUM_TAG)
    try:
        n, seed, rep = fields["n"], fields["seed"], fields["replicate"]
    except KeyError as exc:
        raise FormatError(f"{path}: header missing {exc}") from exc
    if pts.size != n:
        raise FormatError(f"{path}: header says n={n}, found {pts.size} points")
    return Spectrum(n, pts, seed, rep)


def write_lattice(path, ref: PredictedMeasure) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {LATTICE_TAG} {VERSION} n={ref.n} m={ref.m}\n")
        fh.write(_body(ref.lattice))


def read_lattice(path) -> PredictedMeasure:
    fields, pts = _parse(path, LATTICE_TAG)
    ref = build_reference_measure(fields["n"], fields["m"])
    if pts.size != ref.lattice.size or not np.array_equal(pts, ref.lattice):
        raise FormatError(f"{path}: points do not match the lattice for n={ref.n}, m={ref.m}")
    return ref
