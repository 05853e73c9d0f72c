"""Smoke test for the ssw_py extension module.

Build and install first:
    cd crates/py && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math

import ssw_py


def main():
    assert ssw_py.dominates([1.0, 2.0], [2.0, 2.0])
    assert not ssw_py.dominates([1.0, 2.0], [1.0, 2.0])

    q, w, nsq = ssw_py.solve_min_norm([[1.0, 0.0], [0.0, 1.0]])
    assert all(abs(v - 0.5) < 1e-12 for v in q + w) and abs(nsq - 0.5) < 1e-12

    prob = ssw_py.Dtlz2(3, 10)
    assert prob.n_var == 12 and prob.n_obj == 3
    f = prob.evaluate([0.5] * 12)
    assert abs(math.hypot(*f) - 1.0) < 1e-12
    assert len(prob.jacobian([0.3] * 12)) == 3

    front = prob.reference_front(200, seed=0)
    assert len(front) == 200

    gd, igd, delta = ssw_py.delta_p([[0.0, 0.0]], [[1.0, 0.0]])
    assert (gd, igd, delta) == (1.0, 1.0, 1.0)
    assert ssw_py.median_iqr([4.0, 1.0, 3.0, 2.0])[0] == 2.5

    archive = ssw_py.ParetoArchive()
    assert archive.insert([0.0], [1.0, 2.0])
    assert archive.insert([1.0], [2.0, 1.0])
    assert not archive.insert([2.0], [3.0, 3.0])
    assert len(archive) == 2

    r = ssw_py.run_ssw(m=3, population=100, budget=30_000, seed=1)
    assert (r.generations_completed, r.evaluations_used) == (11, 27_600)
    print("ssw archive size", len(r.archive_f), "delta_1", ssw_py.delta_p(r.archive_f, front)[2])

    r = ssw_py.run_nsga2(m=3, k=5, population=20, budget=2_000, seed=1)
    assert r.evaluations_used <= 2_000 and len(r.final_population) == 20

    summary = json.loads(
        ssw_py.run_experiment(
            json.dumps(
                {
                    "problem": {"name": "dtlz2", "m": 3, "k": 4},
                    "algorithm": {"name": "ssw", "population": 12, "budget": 1_500},
                    "runs": 3,
                    "metric": {"reference_front_size": 200},
                }
            ),
            jobs=2,
        )
    )
    assert len(summary["per_run"]) == 3

    assert ssw_py.assumption_a("ou:beta=0.5", theta0=1.0, r=2.0)[0] == 1.0
    assert ssw_py.assumption_b("ou:beta=0.5", mu=0.5)[0] == 1.0
    assert ssw_py.assumption_a("identity")[0] == 0.0
    mean, lo, hi, hits = ssw_py.hitting_time("ou:beta=0.5", [5.0, 0.0], replicas=200)
    assert hits == 1.0 and lo <= mean <= hi

    try:
        ssw_py.assumption_a("spiral")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown field accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
