"""Discretized momentum-space Hamiltonian, its spectrum, and the eigenset file."""
import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import FormatError, InvalidArgument, NumericalFailure
from .grid import grid_from_descriptor
from .kernel import KernelRule, PotentialModel, build_kernel_block

FORMAT_VERSION = 1
_MAGIC_EIGENSET = b"PSPEIGS\0"
_SIGN_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class EigensetL:
    """Spectrum for one angular momentum.

    ``chi[n]`` holds chi_n(p_j) on the grid, normalized so that
    ``sum_j w_j chi_n(p_j)^2 = 1``. States are ordered by energy.
    """

    l: int
    energies: np.ndarray
    chi: np.ndarray
    bound_count: int
    grid: object = field(repr=False)

    @property
    def bound_energies(self):
        return self.energies[: self.bound_count]

    @property
    def bound_chi(self):
        return self.chi[: self.bound_count]

    def state(self, n):
        """chi for principal quantum number ``n`` (n - l - 1 nodes)."""
        idx = int(n) - self.l - 1
        if idx < 0 or idx >= self.energies.size:
            raise InvalidArgument(f"no state n={n} for l={self.l}")
        return self.chi[idx]

    def energy(self, n):
        return float(self.energies[int(n) - self.l - 1])


@dataclass(frozen=True, eq=False)
class Eigenset:
    levels: list
    model: PotentialModel
    grid: object = field(repr=False)
    rule: KernelRule = field(default_factory=KernelRule)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        for i, lev in enumerate(self.levels):
            if lev.l != i:
                raise InvalidArgument("eigenset levels must be l = 0, 1, ... in order")
            if not lev.grid.same_as(self.grid):
                raise InvalidArgument(f"grid of l={lev.l} differs from the eigenset grid")

    @property
    def l_max(self):
        return len(self.levels) - 1

    def __getitem__(self, l):
        return self.levels[l]

    def content_hash(self):
        return config_hash(self.grid.descriptor(), self.model, self.l_max, self.rule)


def config_hash(grid_desc, model, l_max, rule):
    payload = {
        "grid": grid_desc,
        "model": model.descriptor(),
        "l_max": int(l_max),
        "rule": rule.descriptor(),
        "version": FORMAT_VERSION,
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- core steps

def assemble_hamiltonian(grid, block):
    """M_ij = p_i^2/2 delta_ij + 4 pi p_i p_j sqrt(w_i w_j) k_ij."""
    if not block.grid.same_as(grid):
        raise InvalidArgument("kernel block was built on a different grid")
    s = grid.p_nodes * np.sqrt(grid.quad_weights)
    M = 4.0 * np.pi * (s[:, None] * s[None, :]) * block.matrix
    M = 0.5 * (M + M.T)
    M[np.diag_indices_from(M)] += 0.5 * grid.p_nodes**2
    return M


def diagonalize_symmetric(matrix):
    """Full spectrum of a real symmetric matrix, ascending.

    LAPACK ``dsyev``: Householder tridiagonalization then implicit QL/QR.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgument("matrix must be square")
    try:
        energies, vectors = scipy.linalg.eigh(matrix, driver="ev", check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"eigensolver failed to converge: {exc}") from exc
    except ValueError as exc:
        raise NumericalFailure(f"eigensolver rejected the matrix: {exc}") from exc
    return energies, vectors


def _fix_signs(chi):
    """First sample above a small fraction of each row's peak is made positive."""
    peak = np.max(np.abs(chi), axis=1, keepdims=True)
    first = np.argmax(np.abs(chi) > _SIGN_FLOOR * peak, axis=1)
    sign = np.sign(chi[np.arange(chi.shape[0]), first])
    sign[sign == 0] = 1.0
    return chi * sign[:, None]


def solve_l(grid, model, l, rule=None):
    rule = rule or KernelRule()
    block = build_kernel_block(grid, l, model, rule)
    H = assemble_hamiltonian(grid, block)
    energies, vectors = diagonalize_symmetric(H)
    chi = _fix_signs(vectors.T / np.sqrt(grid.quad_weights)[None, :])
    bound = int(np.count_nonzero(energies < 0.0))
    return EigensetL(l=int(l), energies=energies, chi=np.ascontiguousarray(chi),
                     bound_count=bound, grid=grid)


def build_eigenset(grid, model, l_max, rule=None, progress=None):
    """Kernel, Hamiltonian and spectrum for every l in 0..l_max."""
    rule = rule or KernelRule()
    levels = []
    for l in range(int(l_max) + 1):
        levels.append(solve_l(grid, model, l, rule))
        if progress is not None:
            progress(l, levels[-1])
    return Eigenset(levels=levels, model=model, grid=grid, rule=rule)


# ---------------------------------------------------------------- diagnostics

def rms_deviation(eigenset_l, n, exact):
    """sqrt((1/N) sum_j w_j (chi_j - exact_j)^2), sign-aligned to ``exact``."""
    exact = np.asarray(exact, dtype=float)
    grid = eigenset_l.grid
    if exact.shape != (grid.n_points,):
        raise InvalidArgument("exact samples do not match the grid")
    chi = eigenset_l.state(n)
    w = grid.quad_weights
    if np.sum(w * chi * exact) < 0:
        chi = -chi
    return float(np.sqrt(np.sum(w * (chi - exact) ** 2) / grid.n_points))


def orthonormality_residual(eigenset_l):
    w = eigenset_l.grid.quad_weights
    chi = eigenset_l.chi
    S = (chi * w[None, :]) @ chi.T
    return float(np.max(np.abs(S - np.eye(S.shape[0]))))


def completeness_residual(eigenset_l):
    """max |w_i sum_n chi_n(p_i) chi_n(p_j) - delta_ij| (scaled to be relative)."""
    w = eigenset_l.grid.quad_weights
    chi = eigenset_l.chi
    C = w[:, None] * (chi.T @ chi)
    return float(np.max(np.abs(C - np.eye(C.shape[0]))))


def count_nodes(chi, floor=1e-6):
    """Sign changes of ``chi`` ignoring samples below ``floor * max|chi|``."""
    chi = np.asarray(chi)
    sig = chi[np.abs(chi) > floor * np.max(np.abs(chi))]
    return int(np.count_nonzero(np.diff(np.sign(sig)) != 0))


def level_table(eigenset, n_levels=4):
    """Rows (l, n, E, |E - E_exact| or None) for the lowest bound levels."""
    rows = []
    hydrogenic = eigenset.model.is_hydrogenic
    Z = eigenset.model.Z
    for lev in eigenset.levels:
        for k in range(min(n_levels, lev.energies.size)):
            n = lev.l + 1 + k
            E = float(lev.energies[k])
            err = abs(E + Z * Z / (2.0 * n * n)) if hydrogenic else None
            rows.append((lev.l, n, E, err))
    return rows


# ---------------------------------------------------------------- persistence

def _write_container(path, magic, header, arrays):
    """magic | u32 version | u64 header length | header JSON | payload.

    Arrays are raw little-endian, listed in the header with dtype, shape and
    offset; the header carries a SHA-256 of the payload.
    """
    chunks = []
    directory = []
    offset = 0
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<")
        raw = arr.astype(dt, copy=False).tobytes()
        directory.append({"name": name, "dtype": dt.str, "shape": list(arr.shape),
                          "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = dict(header)
    header["arrays"] = directory
    header["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    header["payload_nbytes"] = len(payload)
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(payload)


def _read_container(path, magic):
    with open(path, "rb") as fh:
        blob = fh.read()
    pre = len(magic) + 12
    if len(blob) < pre or blob[: len(magic)] != magic:
        kind = magic.rstrip(b"\0").decode()
        raise FormatError(f"{path}: not a {kind} file")
    version, hlen = struct.unpack("<IQ", blob[len(magic): pre])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(blob) < pre + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[pre: pre + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header") from exc
    payload = blob[pre + hlen:]
    if len(payload) != header.get("payload_nbytes"):
        raise FormatError(f"{path}: truncated payload")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise FormatError(f"{path}: payload checksum mismatch")
    arrays = {}
    for entry in header["arrays"]:
        start = entry["offset"]
        raw = payload[start: start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    return header, arrays


def save_eigenset(eigenset, path):
    header = {
        "kind": "eigenset",
        "grid": eigenset.grid.descriptor(),
        "model": eigenset.model.descriptor(),
        "rule": eigenset.rule.descriptor(),
        "l_max": eigenset.l_max,
        "bound_count": [lev.bound_count for lev in eigenset.levels],
        "content_hash": eigenset.content_hash(),
    }
    arrays = []
    for lev in eigenset.levels:
        arrays.append((f"energies_{lev.l}", lev.energies))
        arrays.append((f"chi_{lev.l}", lev.chi))
    _write_container(path, _MAGIC_EIGENSET, header, arrays)


def load_eigenset(path):
    header, arrays = _read_container(path, _MAGIC_EIGENSET)
    try:
        grid = grid_from_descriptor(header["grid"])
        m = header["model"]
        model = PotentialModel(m["Z"], tuple(m["short_range"]), m["r_cutoff"])
        rule = KernelRule(**header["rule"])
        levels = []
        for l in range(header["l_max"] + 1):
            levels.append(EigensetL(l=l, energies=arrays[f"energies_{l}"],
                                    chi=arrays[f"chi_{l}"],
                                    bound_count=header["bound_count"][l], grid=grid))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: incomplete eigenset file") from exc
    es = Eigenset(levels=levels, model=model, grid=grid, rule=rule)
    if es.content_hash() != header.get("content_hash"):
        raise FormatError(f"{path}: content hash mismatch")
    return es


def export_levels_text(eigenset, path, n_levels=4):
    with open(path, "w") as fh:
        fh.write("# l n energy abs_error_vs_hydrogen\n")
        for l, n, E, err in level_table(eigenset, n_levels):
            fh.write(f"{l} {n} {E:.16e} {'nan' if err is None else f'{err:.6e}'}\n")
