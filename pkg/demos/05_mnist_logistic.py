#!/usr/bin/env python3
"""Federated logistic regression on MNIST from the raw IDX files.

Download the four IDX files first (e.g. from the torchvision or Kaggle
mirrors), decompress them, and point MNIST_DIR at the directory:

    train-images-idx3-ubyte   train-labels-idx1-ubyte
    t10k-images-idx3-ubyte    t10k-labels-idx1-ubyte

100 clients, two digit classes each, availability down to p_min = 0.1.
"""

import sys
from pathlib import Path

from fedsim import ExperimentConfig, ModelSpec, run_experiment

MNIST_DIR = Path("data/mnist")

names = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]
if not all((MNIST_DIR / n).exists() for n in names):
    print(f"place the decompressed MNIST IDX files under {MNIST_DIR}/ first:")
    for n in names:
        print(f"  {n}")
    sys.exit(0)

config = ExperimentConfig(
    strategy="fedar",
    num_clients=100,
    rounds=100,
    local_steps=5,
    batch_size=64,
    eta0=0.1,
    rho=0.1,
    model=ModelSpec("logistic-regression", 784, 10, weight_decay=0.001),
    dataset={
        "kind": "idx",
        "images": str(MNIST_DIR / names[0]),
        "labels": str(MNIST_DIR / names[1]),
        "test_images": str(MNIST_DIR / names[2]),
        "test_labels": str(MNIST_DIR / names[3]),
    },
    p_min=0.1,
    seed=0,
    eval_every=5,
)

for record in run_experiment(config).records:
    print(f"round {record.round:>3}: loss {record.global_train_loss:.4f} "
          f"acc {record.global_test_accuracy:.4f} "
          f"(received {len(record.participating)}, contributing {record.n_t})")
