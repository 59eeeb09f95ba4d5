"""Pure NumPy implementation of the element assembly kernel.

Same contract as the compiled extension module; used when the extension
is not built.  Everything is expressed through gathers and einsum
contractions over a chunk of elements at a time.
"""

import numpy as np

__all__ = ["local_poisson_systems"]


def local_poisson_systems(
    values, derivs, elem_index, qp_index, fn_index, metric, load, out_a, out_b
):
    """Accumulate local stiffness matrices and load vectors for a chunk.

    Parameters
    ----------
    values, derivs : ndarray, shape (d, max_nel, n_q, kmax)
        Per-direction tables of 1D basis values and first derivatives on
        each element's quadrature nodes, padded to common sizes.
    elem_index : ndarray, shape (n_chunk, d), int64
        Per-direction element index of every element in the chunk.
    qp_index : ndarray, shape (n_qp, d), int32
        Per-direction 1D node index of every flattened tensor quad point.
    fn_index : ndarray, shape (n_loc, d), int32
        Per-direction local index of every flattened tensor basis function.
    metric : ndarray, shape (n_chunk, n_qp, d, d)
        Geometric coefficient inv(J) inv(J).T |det J| times the quad
        weight, per element and quad point.
    load : ndarray, shape (n_chunk, n_qp)
        Forcing times |det J| times the quad weight.
    out_a : ndarray, shape (n_chunk, n_loc, n_loc)
    out_b : ndarray, shape (n_chunk, n_loc)
        Accumulated into; callers pass zero-initialized arrays.
    """
    d = elem_index.shape[1]
    n_qp, n_loc = qp_index.shape[0], fn_index.shape[0]
    n_chunk = elem_index.shape[0]

    # per-direction tables gathered to (n_chunk, n_qp, n_loc)
    w_dir = []
    d_dir = []
    for axis in range(d):
        tab_v = values[axis][elem_index[:, axis]][:, qp_index[:, axis], :]
        tab_d = derivs[axis][elem_index[:, axis]][:, qp_index[:, axis], :]
        w_dir.append(tab_v[:, :, fn_index[:, axis]])
        d_dir.append(tab_d[:, :, fn_index[:, axis]])

    val = w_dir[0].copy()
    for axis in range(1, d):
        val *= w_dir[axis]

    grad = np.empty((n_chunk, n_qp, n_loc, d))
    for m in range(d):
        g = d_dir[m].copy()
        for axis in range(d):
            if axis != m:
                g *= w_dir[axis]
        grad[..., m] = g

    half = np.einsum("cqam,cqmn->cqan", grad, metric, optimize=True)
    out_a += np.einsum("cqan,cqbn->cab", half, grad, optimize=True)
    out_b += np.einsum("cqa,cq->ca", val, load, optimize=True)
