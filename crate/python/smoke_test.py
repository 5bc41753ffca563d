"""Smoke test for the installed `ncagc` extension module.

    pip install maturin && maturin develop -m crates/python/Cargo.toml
    python python/smoke_test.py
"""

import os
import sys
import tempfile

import numpy as np

import ncagc


def main() -> int:
    graph = ncagc.Graph.planted_partition(10, 3, 30, 0.5, 0.02, seed=0)
    print(graph)

    cfg = ncagc.TrainConfig(epochs=20, encoder_dims=[16, 8], k=5, lr=5e-3, seed=3)
    result = ncagc.train(graph, cfg)
    print(result, f"{result.wall_seconds:.2f} s")
    assert len(result.history) == 20
    assert all(np.isfinite(row["total"]) for row in result.history)
    assert result.metrics is not None

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        result.checkpoint.save(path)
        reloaded = ncagc.Checkpoint.load(path)
        again = ncagc.evaluate(reloaded, graph)
    assert again["labels"] == result.labels, "evaluate did not reproduce the run"
    assert again["metrics"]["acc"] == result.metrics["acc"]

    c = reloaded.self_expression
    affinity = ncagc.build_affinity(c.T, graph.num_clusters)
    assert np.allclose(affinity, affinity.T) and (affinity >= 0).all()

    mask = ncagc.knn_positive_mask(graph.attributes, 4)
    assert mask.sum(axis=1).tolist() == [4] * graph.num_nodes

    km = ncagc.kmeans(graph.attributes, graph.num_clusters, seed=0)
    print("k-means on attributes:", ncagc.evaluate_labels(km, graph.labels))
    assert abs(ncagc.ari([0, 1, 0, 1], [0, 0, 1, 1]) + 0.5) < 1e-12

    try:
        ncagc.train(graph, cfg.replace(lr=1e300))
    except ncagc.NumericalError as err:
        print("divergence reported:", err)
    else:
        raise AssertionError("divergence was not reported")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
