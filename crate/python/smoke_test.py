"""Smoke test for the compiled `homophily` extension.

Build and install first:

    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/homophily-*.whl
"""

import math
import tempfile

import homophily as h


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    # Path a - a - b: egos 0 and 1 are in group a, ego 1 sees one a of two.
    path = h.Graph(3, [(0, 1), (1, 2)])
    y = [True, True, False]
    check(math.isclose(h.homophily(path, y), 0.75), "path homophily is 0.75")
    full = h.Mask.full(path)
    est = h.estimate(path, y, full, model="no_model")
    check(math.isclose(est["h_hat"], 0.75), "no-model estimate on full labels")

    g = h.Graph.preferential_attachment(800, m=5, k=0.8, seed=3)
    check(g.node_count == 800 and g.edge_count > 0, repr(g))
    nodes = h.simulate_nodes(g, dgp="main", seed=4)
    x, y = nodes["x"], nodes["y"]
    check(len(y) == 800 and all(0.0 < p < 1.0 for p in nodes["p"]), "simulated outcomes")

    mask = h.Mask.random_nodes(g, 0.2, seed=5)
    check(mask.labeled_node_count == 160, "random node sample size")
    truth = h.homophily(g, y)
    for model in h.MODELS:
        r = h.estimate(g, y, mask, model=model, mode="oracle", x=x, truth=True)
        check(math.isclose(r["h_true"], truth), f"{model}: h_true matches")
        if r["r1"] is not None:
            check(abs(r["h_hat"] - (r["h_true"] - r["r1"] - r["r2"])) < 1e-9, f"{model}: bias decomposition")

    biased = h.Mask.biased(g, x, 160, level="node", seed=6)
    check(biased.alpha is not None, "biased sampler reports its intercept")

    c = h.coleman(g, [float(v) for v in y])
    check(-1.0 <= c["index"] <= 1.0, "coleman index in range")

    d = h.diagnose(g, y, h.Mask.random_edges(g, 0.1, seed=7), model="node", x=x, folds=5, permutations=50)
    check(math.isclose(sum(d["fold_sums"]), d["total"], abs_tol=1e-9), "diagnostic folds sum to total")

    with tempfile.TemporaryDirectory() as out:
        rows = h.run_simulation("n_nodes = 300\nreplications = 1\nbase_seed = 2\n", out_dir=out)
    check(len(rows) == 120, "battery row count")

    try:
        h.run_simulation("replicates = 3\n")
    except ValueError as e:
        check("replicates" in str(e), "bad config raises ValueError")
    else:
        raise SystemExit("FAIL: bad config accepted")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
