"""Desk-scale analytic oracles: linear generator, nearest-centroid classifier,
exact pseudo-inverse encoder.

The generator matrix has orthonormal columns, so latent l2 distances are
isometric to image-subspace l2 distances and latent-space and image-space
optima are analytically relatable in tests. The whole suite is a pure
function of its seed and serializes to a single JSON fixture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BoundsBox, UNIT_BOX, Vector, clamp_to_bounds, make_rng
from .errors import ContractViolation, SuiteConstructionFailed
from .oracles import ClassifierOracle, EncoderOracle, GeneratorOracle


class LinearGenerator(GeneratorOracle):
    """generate(w) = A @ w + b, optionally squashed into [0, 1]."""

    def __init__(self, matrix: np.ndarray, offset: np.ndarray, squash: bool = False,
                 latent_bounds: BoundsBox = UNIT_BOX):
        matrix = np.asarray(matrix, dtype=np.float64)
        offset = np.asarray(offset, dtype=np.float64)
        if matrix.ndim != 2 or offset.shape != (matrix.shape[0],):
            raise ContractViolation("matrix must be (image_dim, latent_dim), offset (image_dim,)")
        if np.linalg.matrix_rank(matrix) != matrix.shape[1]:
            raise ContractViolation("generator matrix must have full column rank")
        self.matrix = matrix
        self.offset = offset
        self.squash = squash
        self.latent_bounds = latent_bounds
        self.image_dim, self.latent_dim = matrix.shape
        self.concurrent = True  # immutable after construction

    def generate(self, w: Vector) -> Vector:
        x = self.matrix @ w + self.offset
        if self.squash:
            x = np.clip(x, 0.0, 1.0)
        return x


class CentroidClassifier(ClassifierOracle):
    """argmin_k ||x - c_k||, ties broken by lowest index.

    Confidence of the winner is softmax over -||x - c_k|| / temperature.
    """

    def __init__(self, centroids: np.ndarray, temperature: float = 0.05):
        centroids = np.asarray(centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 2:
            raise ContractViolation("need at least 2 centroids of shape (K, image_dim)")
        if temperature <= 0:
            raise ContractViolation("temperature must be positive")
        self.centroids = centroids
        self.temperature = temperature
        self.num_classes, self.input_dim = centroids.shape
        self.concurrent = True

    def distances(self, x: Vector) -> np.ndarray:
        return np.linalg.norm(self.centroids - x, axis=1)

    def classify(self, x: Vector) -> tuple[int, float]:
        d = self.distances(x)
        label = int(np.argmin(d))  # np.argmin takes the lowest index on ties
        logits = -d / self.temperature
        logits -= logits.max()
        probs = np.exp(logits)
        probs /= probs.sum()
        return label, float(probs[label])


class PseudoInverseEncoder(EncoderOracle):
    """Exact inverse of a LinearGenerator on its range.

    With orthonormal columns, pinv(A) == A.T, so
    encode(generate(w)) == w to within 1e-9 whenever squash was inactive.
    """

    def __init__(self, generator: LinearGenerator):
        self.generator = generator
        self.pinv = np.linalg.pinv(generator.matrix)
        self.concurrent = True

    def encode(self, x: Vector) -> Vector:
        return self.pinv @ (x - self.generator.offset)


@dataclass
class SyntheticSuite:
    """A generator/classifier/encoder triple plus a labeled sample set."""

    generator: LinearGenerator
    classifier: CentroidClassifier
    encoder: PseudoInverseEncoder
    latent_centers: np.ndarray  # (K, latent_dim) class centers in latent space
    sample_latents: np.ndarray  # (N, latent_dim)
    sample_labels: np.ndarray  # (N,)
    seed: int
    sample_radius: float

    @property
    def latent_dim(self) -> int:
        return self.generator.latent_dim

    @property
    def image_dim(self) -> int:
        return self.generator.image_dim

    @property
    def num_classes(self) -> int:
        return self.classifier.num_classes

    def sample_image(self, index: int) -> Vector:
        return self.generator.generate(self.sample_latents[index])

    def samples_of_class(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.sample_labels == label)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "latent_dim": self.latent_dim,
            "image_dim": self.image_dim,
            "num_classes": self.num_classes,
            "matrix": self.generator.matrix.tolist(),
            "offset": self.generator.offset.tolist(),
            "squash": self.generator.squash,
            "latent_low": self.generator.latent_bounds.low,
            "latent_high": self.generator.latent_bounds.high,
            "centroids": self.classifier.centroids.tolist(),
            "temperature": self.classifier.temperature,
            "latent_centers": self.latent_centers.tolist(),
            "sample_latents": self.sample_latents.tolist(),
            "sample_labels": self.sample_labels.tolist(),
            "sample_radius": self.sample_radius,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSuite":
        gen = LinearGenerator(
            np.array(d["matrix"]),
            np.array(d["offset"]),
            squash=d["squash"],
            latent_bounds=BoundsBox(d["latent_low"], d["latent_high"]),
        )
        clf = CentroidClassifier(np.array(d["centroids"]), temperature=d["temperature"])
        return cls(
            generator=gen,
            classifier=clf,
            encoder=PseudoInverseEncoder(gen),
            latent_centers=np.array(d["latent_centers"]),
            sample_latents=np.array(d["sample_latents"]),
            sample_labels=np.array(d["sample_labels"], dtype=np.int64),
            seed=d["seed"],
            sample_radius=d["sample_radius"],
        )

    @classmethod
    def load(cls, path) -> "SyntheticSuite":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def make_suite(
    latent_dim: int = 32,
    image_dim: int = 256,
    num_classes: int = 10,
    seed: int = 0,
    samples_per_class: int = 20,
    squash: bool = False,
    sample_radius: float = 0.2,
    temperature: float = 0.05,
    max_rounds: int = 100,
) -> SyntheticSuite:
    """Build a seeded suite with well-separated classes.

    Class centers live in latent space; the image-space centroids are their
    generations, so the orthonormal generator keeps the separation geometry
    intact. Pairwise centroid distance is forced to at least 4x the
    intra-class sample radius; the labeled set is verified to classify 100%
    correctly.
    """
    if latent_dim > image_dim:
        raise ContractViolation("latent_dim must not exceed image_dim")
    if num_classes < 2:
        raise ContractViolation("need at least 2 classes")
    rng = make_rng(seed)

    # Orthonormal columns via QR of a Gaussian draw; sign-fix for determinism.
    g = rng.standard_normal((image_dim, latent_dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    matrix = q
    # Center the latent box at mid-gray so generated images sit inside [0, 1].
    offset = 0.5 * np.ones(image_dim) - matrix @ (0.5 * np.ones(latent_dim))
    generator = LinearGenerator(matrix, offset, squash=squash)

    min_gap = 4.0 * sample_radius
    centers = None
    for _ in range(max_rounds):
        cand = rng.uniform(sample_radius, 1.0 - sample_radius, size=(num_classes, latent_dim))
        diffs = cand[:, None, :] - cand[None, :, :]
        dists = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dists, np.inf)
        if dists.min() < min_gap:
            continue
        # Pack the layout down to the separation floor: shrinking towards the
        # mean keeps centers inside the box and gives the decision regions
        # non-trivial shared boundary structure instead of isolated islands.
        factor = min_gap / dists.min()
        mean = cand.mean(axis=0)
        centers = mean + (cand - mean) * factor
        break
    if centers is None:
        raise SuiteConstructionFailed(
            f"no centroid layout with pairwise gap >= {min_gap} in {max_rounds} rounds"
        )

    centroids = np.stack([generator.generate(c) for c in centers])
    classifier = CentroidClassifier(centroids, temperature=temperature)

    latents = []
    labels = []
    for k in range(num_classes):
        for _ in range(samples_per_class):
            u = rng.standard_normal(latent_dim)
            u /= np.linalg.norm(u)
            radius = sample_radius * rng.uniform() ** (1.0 / latent_dim)
            w = clamp_to_bounds(centers[k] + radius * u, generator.latent_bounds)
            latents.append(w)
            labels.append(k)
    sample_latents = np.stack(latents)
    sample_labels = np.array(labels, dtype=np.int64)

    for w, y in zip(sample_latents, sample_labels):
        got, _ = classifier.classify(generator.generate(w))
        if got != y:
            raise SuiteConstructionFailed("labeled sample misclassified; separation too tight")

    return SyntheticSuite(
        generator=generator,
        classifier=classifier,
        encoder=PseudoInverseEncoder(generator),
        latent_centers=centers,
        sample_latents=sample_latents,
        sample_labels=sample_labels,
        seed=seed,
        sample_radius=sample_radius,
    )


def analytic_boundary_distance(c: CentroidClassifier, x: Vector, target: int) -> float:
    """Signed distance from x to the target region's nearest bisector hyperplane.

    The target region is the intersection of halfspaces
    ||x - c_target|| <= ||x - c_k||; each face is the perpendicular bisector of
    (c_target, c_k). Positive inside the target region, negative outside.
    """
    if not 0 <= target < c.num_classes:
        raise ContractViolation("target label out of range")
    ct = c.centroids[target]
    best = np.inf
    for k in range(c.num_classes):
        if k == target:
            continue
        ck = c.centroids[k]
        gap = np.linalg.norm(ck - ct)
        # signed distance to the bisector, positive on the target side
        s = (np.dot(x - ck, x - ck) - np.dot(x - ct, x - ct)) / (2.0 * gap)
        best = min(best, s)
    return float(best)
