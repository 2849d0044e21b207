"""Linear operators: implicit (matrix-free, context-bearing) and assembled.

Implicit operators wrap a block form plus boundary conditions and expose
apply / apply_transpose / extract_sub / assemble.  Submatrix extraction is
field-based: an index set is accepted only if it is a concatenation of a
subset of the field index sets, and the extracted operator is again
implicit, built from the restriction of the block form to those fields.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .forms import Form
from .spaces import MixedSpace

__all__ = ["LinearOperator", "ImplicitOperator", "AssembledOperator",
           "NoFieldMatch", "match_fields", "write_matrix_market"]


class NoFieldMatch(Exception):
    """The index set is not a concatenation of a subset of the fields."""


def match_fields(query, fields):
    """Field ids whose concatenated index sets equal the query exactly."""
    query = np.asarray(query)
    matched = []
    ptr = 0
    for fid, fis in enumerate(fields):
        fis = np.asarray(fis)
        if ptr < len(query) and query[ptr] == fis[0]:
            if ptr + len(fis) > len(query) or \
                    not np.array_equal(query[ptr:ptr + len(fis)], fis):
                raise NoFieldMatch("index set straddles field boundaries")
            matched.append(fid)
            ptr += len(fis)
    if ptr != len(query):
        raise NoFieldMatch("index set is not a concatenation of fields")
    return matched


class LinearOperator:
    shape = (0, 0)

    def apply(self, x):
        raise NotImplementedError

    def apply_transpose(self, x):
        raise NotImplementedError

    def check_shape(self, x):
        if len(x) != self.shape[1]:
            raise ValueError(f"operand length {len(x)} does not match "
                             f"operator shape {self.shape}")

    def field_index_sets(self):
        return None

    def memory_footprint(self):
        return 0

    def flops_per_apply(self):
        return 2 * self.shape[0] * self.shape[1]


class AssembledOperator(LinearOperator):
    """CSR-backed operator."""

    def __init__(self, A, fields=None, context=None):
        self.A = sp.csr_matrix(A)
        self.shape = self.A.shape
        self._fields = fields
        self.context = context or {}

    def apply(self, x):
        self.check_shape(x)
        return self.A @ x

    def apply_transpose(self, x):
        return self.A.T @ x

    def field_index_sets(self):
        return self._fields

    def extract_sub(self, row_is, col_is):
        if self._fields is None:
            sub = self.A[np.ix_(np.asarray(row_is), np.asarray(col_is))]
            return AssembledOperator(sub, context=self.context)
        rf = match_fields(row_is, self._fields)
        cf = match_fields(col_is, self._fields)
        sub = self.A[np.ix_(np.asarray(row_is), np.asarray(col_is))]
        return AssembledOperator(sub, context=self.context)

    def assemble(self):
        return self

    def memory_footprint(self):
        return self.A.data.nbytes + self.A.indices.nbytes + self.A.indptr.nbytes

    def flops_per_apply(self):
        return 2 * self.A.nnz


def _sub_bc_dofs(bcs, parent_space, field_ids, sub_space):
    """Global Dirichlet dofs of the parent BCs within the sub mixed space."""
    out = [np.empty(0, dtype=np.int64)]
    for bc in bcs:
        if bc.field in field_ids:
            pos = field_ids.index(bc.field)
            out.append(bc.dofs + sub_space.offsets[pos])
    return np.unique(np.concatenate(out))


class ImplicitOperator(LinearOperator):
    """Matrix-free operator carrying the PDE-level problem description."""

    def __init__(self, form, bcs=(), bc_rows=None, bc_cols=None):
        self.form = form
        self.bcs = tuple(bcs)
        if bcs:
            from .forms import collect_bc_dofs
            bc_rows = collect_bc_dofs(form.row_space, bcs)
            bc_cols = collect_bc_dofs(form.col_space, bcs)
        none = np.empty(0, dtype=np.int64)
        self.bc_rows = none if bc_rows is None else np.asarray(bc_rows)
        self.bc_cols = none if bc_cols is None else np.asarray(bc_cols)
        self.shape = (form.row_space.num_dofs, form.col_space.num_dofs)
        self._match_cache = {}

    @property
    def context(self):
        return self.form.context

    def apply(self, x):
        self.check_shape(x)
        return self.form.action(x, bc_rows=self.bc_rows, bc_cols=self.bc_cols)

    def apply_transpose(self, x):
        return self.form.action(x, transpose=True,
                                bc_rows=self.bc_rows, bc_cols=self.bc_cols)

    def field_index_sets(self):
        cs = self.form.col_space
        return [cs.field_index_set(i) for i in range(cs.num_fields)]

    def _match(self, index_set):
        key = np.asarray(index_set).tobytes()
        hit = self._match_cache.get(key)
        if hit is None:
            hit = match_fields(index_set, self.field_index_sets())
            self._match_cache[key] = hit
        return hit

    def extract_sub(self, row_is, col_is):
        rf = self._match(row_is)
        cf = self._match(col_is)
        return self.extract_fields(rf, cf)

    def extract_fields(self, rf, cf):
        """Implicit sub-operator over the given row/column field ids."""
        form = self.form
        rf, cf = list(rf), list(cf)
        if rf == list(range(form.row_space.num_fields)) and rf == cf:
            return self
        col_sub = MixedSpace([form.col_space.fields[i] for i in cf])
        row_sub = col_sub if rf == cf else \
            MixedSpace([form.row_space.fields[i] for i in rf])
        blocks = {}
        for ri, i in enumerate(rf):
            for ci, j in enumerate(cf):
                terms = form.blocks.get((i, j))
                if terms:
                    blocks[(ri, ci)] = terms
        sub_form = Form(f"{form.kind}[{','.join(map(str, rf))};"
                        f"{','.join(map(str, cf))}]",
                        row_sub, col_sub, blocks,
                        context=form.context,
                        quad_degree=form.quad_degree,
                        bc_diagonal=(rf == cf),
                        state_space=form.state_space)
        bc_rows = _sub_bc_dofs(self.bcs, form.row_space, rf, row_sub) \
            if self.bcs else self._slice_bc(self.bc_rows, form.row_space, rf, row_sub)
        bc_cols = _sub_bc_dofs(self.bcs, form.col_space, cf, col_sub) \
            if self.bcs else self._slice_bc(self.bc_cols, form.col_space, cf, col_sub)
        sub = ImplicitOperator(sub_form, bc_rows=bc_rows, bc_cols=bc_cols)
        sub.parent = self
        sub.field_ids = (tuple(rf), tuple(cf))
        return sub

    @staticmethod
    def _slice_bc(bc_dofs, space, field_ids, sub_space):
        out = [np.empty(0, dtype=np.int64)]
        for pos, i in enumerate(field_ids):
            lo, hi = space.offsets[i], space.offsets[i + 1]
            local = bc_dofs[(bc_dofs >= lo) & (bc_dofs < hi)] - lo
            out.append(local + sub_space.offsets[pos])
        return np.unique(np.concatenate(out))

    def assemble(self):
        """Force assembly of the underlying form, with the stored BCs."""
        A = self.form.assemble(bc_rows=self.bc_rows, bc_cols=self.bc_cols)
        return AssembledOperator(A, fields=self.field_index_sets(),
                                 context=self.form.context)

    def memory_footprint(self):
        """Bytes of coefficient and state storage (no matrix entries)."""
        total = self.bc_rows.nbytes + self.bc_cols.nbytes
        state = self.form.context.get("state")
        if state is not None:
            total += np.asarray(state).nbytes
        total += 8 * sum(1 for v in self.form.context.values()
                         if np.isscalar(v))
        return total

    def flops_per_apply(self):
        return self.form.flops_per_apply()


def write_matrix_market(A, stream):
    """CSR export in MatrixMarket coordinate format (debugging aid)."""
    A = sp.coo_matrix(A)
    stream.write("%%MatrixMarket matrix coordinate real general\n")
    stream.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
    for i, j, v in zip(A.row, A.col, A.data):
        stream.write(f"{i + 1} {j + 1} {v:.17g}\n")
