"""Shared fixtures: synthetic image tasks and real-dataset discovery.

Real MNIST/FashionMNIST files are looked up under $LOCKNET_DATA (default
./data), laid out as:

    data/mnist/train-images-idx3-ubyte[.gz]   (+ labels, + t10k pair)
    data/fashion-mnist/train-images-idx3-ubyte[.gz]  (same names)

Training-gated acceptance tests skip with an explicit message when the
files are missing; everything else runs on synthetic data.
"""

import gzip
import os
import shutil

import numpy as np
import pytest

from locknet.datasets import LabeledDataset, load_idx

DATA_ROOT = os.environ.get("LOCKNET_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))

IDX_NAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def make_blob_task(n, k=8, h=8, w=8, noise=25, seed=0, name="blobs"):
    """Synthetic image classification: class c brightens row c (mod h).

    Linearly separable, so small networks reach ~100% in a few epochs;
    used wherever a real dataset is unnecessary.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, n)
    images = np.zeros((n, h, w, 1), dtype=np.int64)
    for cls in range(k):
        images[labels == cls, cls % h, :, 0] = 220
    images = np.clip(images + rng.integers(0, noise, images.shape), 0, 255)
    return LabeledDataset(name, images.astype(np.uint8), labels, k)


def _resolve_idx(directory, stem, tmp_dir):
    plain = os.path.join(directory, stem)
    if os.path.exists(plain):
        return plain
    gz = plain + ".gz"
    if os.path.exists(gz):
        out = os.path.join(tmp_dir, stem)
        if not os.path.exists(out):
            with gzip.open(gz, "rb") as src, open(out, "wb") as dst:
                shutil.copyfileobj(src, dst)
        return out
    return None


def _load_real(subdir, tmp_dir):
    directory = os.path.join(DATA_ROOT, subdir)
    paths = {}
    for key, stem in IDX_NAMES.items():
        found = _resolve_idx(directory, stem, tmp_dir)
        if found is None:
            pytest.skip(
                f"dataset file {os.path.join(directory, stem)}[.gz] not found; "
                f"place the IDX files under $LOCKNET_DATA to run this test"
            )
        paths[key] = found
    train = load_idx(paths["train_images"], paths["train_labels"],
                     class_count=10, name=subdir)
    test = load_idx(paths["test_images"], paths["test_labels"],
                    class_count=10, name=subdir)
    return train, test


@pytest.fixture(scope="session")
def mnist(tmp_path_factory):
    return _load_real("mnist", str(tmp_path_factory.mktemp("mnist")))


@pytest.fixture(scope="session")
def fashion_mnist(tmp_path_factory):
    return _load_real("fashion-mnist", str(tmp_path_factory.mktemp("fashion")))
