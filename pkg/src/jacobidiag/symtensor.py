"""Dense symmetric tensors of order 2-4 and Givens two-plane rotation kernels.

Tensors are stored as full dense ``(n,)*d`` float64 arrays.  Symmetry is an
invariant of the values, not of the storage: every constructor and every
mutating kernel finishes by re-reading each entry from its sorted
(canonical) multi-index, so tensors stay *bitwise* symmetric under any
sequence of rotations.

Index convention: all indices and modes are 0-based.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

__all__ = [
    "SymTensor",
    "TensorSet",
    "mode_product",
    "multi_mode_product",
    "rotate_all_modes_givens",
    "diag_sq_norm",
    "offdiag_sq_norm",
    "set_diag_sq_norm",
    "symmetrize",
    "symmetry_error",
    "save_tensorset",
    "load_tensorset",
]

_SUPPORTED_ORDERS = (2, 3, 4)

# einsum specs keyed by order, for a stack with one leading set axis
_STACK_DIAG = {2: "aii->ai", 3: "aiii->ai", 4: "aiiii->ai"}
_STACK_NEAR = {3: "akll->akl", 4: "aklll->akl"}


@functools.lru_cache(maxsize=16)
def _canonical_map(order, dim):
    """Flat-index gather map sending every entry to its sorted multi-index."""
    idx = np.indices((dim,) * order).reshape(order, -1)
    return np.ravel_multi_index(tuple(np.sort(idx, axis=0)), (dim,) * order)


def _canonicalize_stack(stack):
    """Rewrite each entry with the value at its sorted multi-index (in place)."""
    order = stack.ndim - 1
    dim = stack.shape[-1]
    flat = stack.reshape(stack.shape[0], -1)
    flat[:] = flat[:, _canonical_map(order, dim)]


def _rotate_planes_stack(stack, i, j, c, s):
    """Apply G(i,j,theta)^T on every mode of every tensor in the stack, in place.

    Only the i/j slices of each mode are touched; afterwards the canonical
    gather restores exact symmetry (the untouched block maps to itself).
    """
    order = stack.ndim - 1
    for axis in range(1, order + 1):
        sl = [slice(None)] * (order + 1)
        sl[axis] = i
        idx_i = tuple(sl)
        sl[axis] = j
        idx_j = tuple(sl)
        ti = stack[idx_i].copy()
        tj = stack[idx_j]
        stack[idx_i] = c * ti + s * tj
        stack[idx_j] = c * tj - s * ti
    _canonicalize_stack(stack)


def _apply_orthogonal_stack(stack, q):
    """Return the stack with every tensor contracted with q^T on all modes."""
    order = stack.ndim - 1
    qt = np.ascontiguousarray(q.T)
    out = stack
    for axis in range(1, order + 1):
        out = np.moveaxis(np.tensordot(qt, out, axes=([1], [axis])), 0, axis)
    out = np.ascontiguousarray(out)
    _canonicalize_stack(out)
    return out


def symmetrize(tensor):
    """Average a cubical array over all index permutations.

    Returns a :class:`SymTensor`.  Already-symmetric input is a fixed point.
    """
    arr = np.asarray(tensor.data if isinstance(tensor, SymTensor) else tensor,
                     dtype=np.float64)
    if arr.ndim not in _SUPPORTED_ORDERS:
        raise ValueError(f"unsupported tensor order {arr.ndim}")
    if len(set(arr.shape)) != 1:
        raise ValueError(f"tensor is not cubical: shape {arr.shape}")
    flat = arr.reshape(-1)
    if np.array_equal(flat, flat[_canonical_map(arr.ndim, arr.shape[0])]):
        return SymTensor._wrap(arr.copy())    # exact fixed point
    acc = np.zeros_like(arr)
    for perm in itertools.permutations(range(arr.ndim)):
        acc += arr.transpose(perm)
    acc /= math.factorial(arr.ndim)
    return SymTensor(acc, copy=False)


def symmetry_error(tensor):
    """Max absolute deviation from full symmetry over all index permutations."""
    arr = np.asarray(tensor.data if isinstance(tensor, SymTensor) else tensor,
                     dtype=np.float64)
    err = 0.0
    for perm in itertools.permutations(range(arr.ndim)):
        err = max(err, float(np.max(np.abs(arr - arr.transpose(perm)))))
    return err


class SymTensor:
    """Dense fully symmetric tensor of order d in {2, 3, 4} and dimension n >= 2.

    The validating constructor checks symmetry within ``tol * ||T||`` and then
    canonicalizes, so ``data`` is bitwise symmetric afterwards.
    """

    __slots__ = ("data",)

    def __init__(self, data, copy=True, validate=True, tol=1e-9):
        arr = np.array(data, dtype=np.float64, copy=copy)
        if validate:
            if arr.ndim not in _SUPPORTED_ORDERS:
                raise ValueError(f"unsupported tensor order {arr.ndim}")
            if len(set(arr.shape)) != 1 or arr.shape[0] < 2:
                raise ValueError(f"bad tensor shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("tensor entries must be finite")
            err = symmetry_error(arr)
            if err > tol * max(float(np.linalg.norm(arr)), 1e-300):
                raise ValueError(
                    f"tensor is not symmetric: deviation {err:.3e} exceeds "
                    f"{tol:g} * ||T||")
            _canonicalize_stack(arr[None])
        self.data = arr

    @classmethod
    def _wrap(cls, arr):
        """Trusted constructor: no copy, no checks (internal use)."""
        obj = cls.__new__(cls)
        obj.data = arr
        return obj

    @classmethod
    def zeros(cls, order, dim):
        return cls._wrap(np.zeros((dim,) * order))

    @classmethod
    def from_diagonal(cls, values, order):
        """Diagonal tensor with the given diagonal vector."""
        if order not in _SUPPORTED_ORDERS:
            raise ValueError(f"unsupported tensor order {order}")
        values = np.asarray(values, dtype=np.float64)
        n = values.size
        arr = np.zeros((n,) * order)
        arr[(np.arange(n),) * order] = values
        return cls._wrap(arr)

    @property
    def order(self):
        return self.data.ndim

    @property
    def dim(self):
        return self.data.shape[0]

    def copy(self):
        return SymTensor._wrap(self.data.copy())

    def frob_sq(self):
        return float(np.vdot(self.data, self.data))

    def diag(self):
        """The diagonal vector (T[j, j, ..., j])_j."""
        return np.einsum(_STACK_DIAG[self.order], self.data[None])[0]

    def diag_sq_norm(self):
        d = self.diag()
        return float(np.dot(d, d))

    def offdiag_sq_norm(self):
        """Squared norm of the off-diagonal part, equal to ||T||^2 minus the
        squared diagonal norm.

        Summed directly over the zero-diagonal copy: the subtraction form
        carries an eps*||T||^2 noise floor that would mask convergence far
        below it."""
        tmp = self.data.copy()
        idx = np.arange(self.dim)
        tmp[(idx,) * self.order] = 0.0
        return float(np.vdot(tmp, tmp))

    def rotate_plane(self, i, j, theta):
        """In-place rotation of all modes by the (i, j) Givens plane."""
        _check_pair(i, j, self.dim)
        _rotate_planes_stack(self.data[None], i, j, math.cos(theta),
                             math.sin(theta))
        return self

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim})"


def _check_pair(i, j, n):
    if not (0 <= i < j < n):
        raise ValueError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")


def mode_product(tensor, matrix, mode):
    """k-mode product: contract ``matrix`` with the given mode of ``tensor``.

    ``matrix`` has shape (p, n) with n the size of the contracted mode; the
    result is a plain ndarray with that mode resized to p.  ``mode`` is a
    0-based axis.
    """
    arr = np.asarray(tensor.data if isinstance(tensor, SymTensor) else tensor,
                     dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if not (0 <= mode < arr.ndim):
        raise ValueError(f"mode {mode} out of range for order-{arr.ndim} tensor")
    if matrix.shape[1] != arr.shape[mode]:
        raise ValueError(
            f"dimension mismatch: matrix columns {matrix.shape[1]} != "
            f"mode-{mode} size {arr.shape[mode]}")
    return np.moveaxis(np.tensordot(matrix, arr, axes=([1], [mode])), 0, mode)


def multi_mode_product(tensor, matrix):
    """Contract ``matrix`` with every mode: T x_0 M x_1 M ... (plain ndarray)."""
    arr = np.asarray(tensor.data if isinstance(tensor, SymTensor) else tensor,
                     dtype=np.float64)
    for axis in range(arr.ndim):
        arr = mode_product(arr, matrix, axis)
    return arr


def rotate_all_modes_givens(tensor, i, j, theta):
    """Rotate every mode of ``tensor`` by the (i, j, theta) Givens plane.

    Mutates and returns ``tensor``.  Equivalent to the full mode-product
    composition with G(i,j,theta)^T but touches only the i/j fibers,
    O(d n^(d-1)) per call.
    """
    return tensor.rotate_plane(i, j, theta)


def diag_sq_norm(tensor):
    """Sum of squared diagonal entries."""
    return tensor.diag_sq_norm()


def offdiag_sq_norm(tensor):
    """||T||^2 minus the squared diagonal norm (never negative)."""
    return tensor.offdiag_sq_norm()


class TensorSet:
    """m >= 1 symmetric tensors of common order and dimension.

    Stored as one stacked ``(m,) + (n,)*d`` array so rotation and gradient
    kernels vectorize over the set.
    """

    __slots__ = ("stack",)

    def __init__(self, tensors):
        tensors = list(tensors)
        if not tensors:
            raise ValueError("TensorSet needs at least one tensor")
        arrs = []
        for t in tensors:
            if not isinstance(t, SymTensor):
                t = SymTensor(t)
            arrs.append(t.data)
        shape = arrs[0].shape
        if any(a.shape != shape for a in arrs):
            raise ValueError("all tensors in a set must share order and dim")
        self.stack = np.stack(arrs)

    @classmethod
    def _wrap(cls, stack):
        obj = cls.__new__(cls)
        obj.stack = stack
        return obj

    @property
    def order(self):
        return self.stack.ndim - 1

    @property
    def dim(self):
        return self.stack.shape[-1]

    def __len__(self):
        return self.stack.shape[0]

    def __getitem__(self, ell):
        # view into the stack; copy() before mutating independently
        return SymTensor._wrap(self.stack[ell])

    def __iter__(self):
        return (self[ell] for ell in range(len(self)))

    def copy(self):
        return TensorSet._wrap(self.stack.copy())

    def frob_sq(self):
        return float(np.vdot(self.stack, self.stack))

    def diags(self):
        """(m, n) array of diagonal vectors."""
        return np.einsum(_STACK_DIAG[self.order], self.stack)

    def diag_sq_norm(self):
        d = self.diags()
        return float(np.vdot(d, d))

    def offdiag_sq_norm(self):
        """Total squared off-diagonal mass (direct summation, see SymTensor)."""
        tmp = self.stack.copy()
        idx = np.arange(self.dim)
        tmp[(slice(None),) + (idx,) * self.order] = 0.0
        return float(np.vdot(tmp, tmp))

    def near_diag(self):
        """(m, n, n) array N with N[l, k, p] = W^(l)[k, p, p, ..., p]."""
        if self.order == 2:
            return self.stack.copy()
        return np.einsum(_STACK_NEAR[self.order], self.stack)

    def rotate_plane(self, i, j, theta):
        """In-place Givens rotation of all modes of every member tensor."""
        _check_pair(i, j, self.dim)
        _rotate_planes_stack(self.stack, i, j, math.cos(theta), math.sin(theta))
        return self

    def rotated_by(self, q):
        """New TensorSet with every tensor contracted with q^T on all modes."""
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.dim, self.dim):
            raise ValueError(
                f"matrix shape {q.shape} does not match dim {self.dim}")
        return TensorSet._wrap(_apply_orthogonal_stack(self.stack, q))

    def __repr__(self):
        return (f"TensorSet(m={len(self)}, order={self.order}, "
                f"dim={self.dim})")


def set_diag_sq_norm(tensors):
    """Sum of squared diagonal entries over a TensorSet (the objective f)."""
    return tensors.diag_sq_norm()


# ---------------------------------------------------------------------------
# text file format:
#   symtensor v1 d=<d> n=<n> m=<m>
#   <m blocks of n^d whitespace-separated floats, row-major>

def save_tensorset(path, tensors):
    ts = tensors if isinstance(tensors, TensorSet) else TensorSet(tensors)
    d, n, m = ts.order, ts.dim, len(ts)
    with open(path, "w") as fh:
        fh.write(f"symtensor v1 d={d} n={n} m={m}\n")
        for ell in range(m):
            rows = ts.stack[ell].reshape(-1, n)
            for row in rows:
                fh.write(" ".join(f"{v:.17g}" for v in row))
                fh.write("\n")


def load_tensorset(path):
    """Read a tensor set; validates symmetry within 1e-9*||T|| and
    re-symmetrizes (permutation average) on load."""
    with open(path) as fh:
        header = fh.readline().split()
        body = fh.read().split()
    if len(header) != 5 or header[0] != "symtensor" or header[1] != "v1":
        raise ValueError(f"bad symtensor header in {path}")
    try:
        fields = dict(kv.split("=") for kv in header[2:])
        d, n, m = int(fields["d"]), int(fields["n"]), int(fields["m"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad symtensor header in {path}") from exc
    if d not in _SUPPORTED_ORDERS or n < 2 or m < 1:
        raise ValueError(f"unsupported symtensor parameters d={d} n={n} m={m}")
    if len(body) != m * n**d:
        raise ValueError(
            f"expected {m * n**d} values in {path}, found {len(body)}")
    flat = np.array(body, dtype=np.float64).reshape((m,) + (n,) * d)
    tensors = []
    for ell in range(m):
        arr = flat[ell]
        err = symmetry_error(arr)
        if err > 1e-9 * max(float(np.linalg.norm(arr)), 1e-300):
            raise ValueError(
                f"tensor {ell} in {path} is not symmetric within 1e-9*||T|| "
                f"(deviation {err:.3e})")
        tensors.append(symmetrize(arr))
    return TensorSet(tensors)
