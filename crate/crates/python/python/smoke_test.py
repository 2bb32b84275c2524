"""Quick end-to-end check of the bindings: python python/smoke_test.py"""

import math

import mifs_py as m


def main():
    assert abs(m.digamma(1.0) + 0.5772156649015329) < 1e-12
    try:
        m.digamma(0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("digamma(0) should raise")

    data = m.Dataset.friedman(100, seed=3)
    assert (data.n_rows, data.n_features) == (100, 10)
    assert data.names[0] == "X1" and data.target_name == "Y"

    mi_x4 = m.estimate_mi(data, [3], k=6)
    mi_x10 = m.estimate_mi(data, [9], k=6)
    assert mi_x4 > mi_x10, (mi_x4, mi_x10)

    sel = m.select_k(data, k_max=12, folds=10, seed=3)
    assert 1 <= sel["k_star"] <= 12
    assert len(sel["t_grid"]) == 10 and len(sel["t_grid"][0]) == 12

    trace = m.forward_select(data, k=sel["k_star"], seed=3)
    assert trace["mi_evaluations"] == sum(10 - t + 1 + 50 for t in range(1, len(trace["iterations"]) + 1))
    assert trace["selected"], trace["stop_reason"]
    again = m.forward_select(data, k=sel["k_star"], seed=3)
    assert again == trace

    train, test = m.Dataset.friedman(200, seed=4).split(train_fraction=0.5, seed=4)
    chosen = m.knn_rmse(train, test, trace["selected"])
    everything = m.knn_rmse(train, test, list(range(10)))
    assert math.isfinite(chosen) and chosen > 0
    assert m.knn_rmse(train, train, list(range(10)), k_reg=1) == 0.0

    manual = m.Dataset([[0.0, 1.0, 2.0, 3.0]], [1.0, 0.0, 1.0, 0.0])
    assert manual.column(0) == [0.0, 1.0, 2.0, 3.0]
    print(
        f"ok: k*={sel['k_star']} selected={trace['selected']} "
        f"rmse {chosen:.3f} vs all {everything:.3f}"
    )


if __name__ == "__main__":
    main()
