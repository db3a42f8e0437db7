"""Learned latent directions, scale mappers, and the pure latent algebra.

One direction per tag lives as a column of the direction matrix. An edit is
a scalar step along a column; the step size is the difference between a
target scale and the scale the image already has along that column. Two
regularizers shape the matrix: a soft orthogonality penalty on its Gram and
an elementwise L1 sparsity penalty.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .schema import AttributeSchema

MIN_DIRECTION_NORM = 1e-8


class DirectionMatrix(nn.Module):
    """d x N matrix whose column i is the latent direction for tag i."""

    def __init__(self, latent_dim: int, n_tags: int, seed: int | None = None):
        super().__init__()
        gen = torch.Generator()
        if seed is not None:
            gen.manual_seed(seed)
        # zero-mean normal, std 1/sqrt(d); the orthogonality penalty drives
        # columns toward unit norm during training
        init = torch.randn(latent_dim, n_tags, generator=gen) / math.sqrt(latent_dim)
        self.entries = nn.Parameter(init)

    @property
    def latent_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_tags(self) -> int:
        return self.entries.shape[1]

    def column(self, tag: int) -> torch.Tensor:
        if not 0 <= tag < self.n_tags:
            raise IndexError(f"tag index {tag} out of range [0, {self.n_tags})")
        return self.entries[:, tag]


class ScaleMapper(nn.Module):
    """Per-(tag, attribute) affine map from z in U[0,1) to a target scale."""

    def __init__(self, schema: AttributeSchema):
        super().__init__()
        n, m = schema.n_tags, schema.max_attributes
        self.w = nn.Parameter(torch.ones(n, m))
        self.b = nn.Parameter(torch.zeros(n, m))
        mask = torch.zeros(n, m, dtype=torch.bool)
        for tag, count in enumerate(schema.attributes_per_tag):
            mask[tag, :count] = True
        self.register_buffer("valid", mask)

    def validate_pair(self, tag: int, attr: int) -> None:
        n, m = self.valid.shape
        if not (0 <= tag < n and 0 <= attr < m) or not bool(self.valid[tag, attr]):
            raise IndexError(f"({tag}, {attr}) is not a valid (tag, attribute) pair")


def _as_vector(values) -> torch.Tensor:
    t = torch.as_tensor(values)
    if t.dtype not in (torch.float32, torch.float64):
        t = t.float()
    return t


def translate(e, alpha, tag: int, directions: DirectionMatrix) -> torch.Tensor:
    """Step the latent code along the tag's direction: e + alpha * A_i.

    Works on a single code of shape (d,) or a batch (B, d); alpha may be a
    scalar or a per-row tensor of shape (B,). The input is never modified.
    """
    e = _as_vector(e)
    column = directions.column(tag).to(e.dtype)
    alpha_t = torch.as_tensor(alpha, dtype=e.dtype, device=e.device)
    if e.dim() == 1:
        return e + alpha_t * column
    if e.dim() == 2:
        if alpha_t.dim() == 1:
            alpha_t = alpha_t.unsqueeze(1)
        return e + alpha_t * column.unsqueeze(0)
    raise ValueError(f"latent code must be 1-D or 2-D, got shape {tuple(e.shape)}")


def project(e, tag: int, directions: DirectionMatrix) -> torch.Tensor:
    """Scale of the latent code along the tag's direction: (e . A_i) / ||A_i||.

    Returns a scalar tensor for a (d,) code, a (B,) tensor for a batch.
    """
    e = _as_vector(e)
    column = directions.column(tag).to(e.dtype)
    norm = torch.linalg.vector_norm(column)
    if float(norm) <= MIN_DIRECTION_NORM:
        raise ValueError(f"direction for tag {tag} has near-zero norm ({float(norm):.3e})")
    if e.dim() == 1:
        return torch.dot(e, column) / norm
    if e.dim() == 2:
        return (e @ column) / norm
    raise ValueError(f"latent code must be 1-D or 2-D, got shape {tuple(e.shape)}")


def sample_target_scale(tag: int, attr: int, z, mapper: ScaleMapper) -> torch.Tensor:
    """Affine-map z in U[0,1) to the target scale for (tag, attribute)."""
    mapper.validate_pair(tag, attr)
    z_t = torch.as_tensor(z, dtype=mapper.w.dtype, device=mapper.w.device)
    if bool((z_t < 0).any()) or bool((z_t >= 1).any()):
        raise ValueError(f"z must lie in [0, 1), got {z!r}")
    return mapper.w[tag, attr] * z_t + mapper.b[tag, attr]


def shift_scale(alpha_target, alpha_source) -> torch.Tensor:
    """Net shift to apply: target scale minus the scale the image already has."""
    at = torch.as_tensor(alpha_target)
    als = torch.as_tensor(alpha_source, dtype=at.dtype if at.is_floating_point() else None)
    return at - als


def orthogonality_penalty(directions: DirectionMatrix | torch.Tensor) -> torch.Tensor:
    """Frobenius norm of (A^T A - I): zero iff the columns are orthonormal."""
    a = directions.entries if isinstance(directions, DirectionMatrix) else _as_vector(directions)
    n = a.shape[1]
    gram = a.T @ a
    eye = torch.eye(n, dtype=a.dtype, device=a.device)
    return torch.linalg.matrix_norm(gram - eye, ord="fro")


def sparsity_penalty(directions: DirectionMatrix | torch.Tensor) -> torch.Tensor:
    """Elementwise L1 norm of the direction matrix."""
    a = directions.entries if isinstance(directions, DirectionMatrix) else _as_vector(directions)
    return a.abs().sum()
