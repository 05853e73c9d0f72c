use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn run(code: &str) {
    Python::initialize();
    Python::attach(|py| {
        let module = wrap_pymodule!(ssw_py::ssw_py)(py);
        let locals = PyDict::new(py);
        locals.set_item("ssw_py", module).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        py.run(&code, None, Some(&locals)).map_err(|e| e.display(py)).unwrap();
    });
}

#[test]
fn core_functions() {
    run(r#"
assert ssw_py.dominates([0.0, 0.0], [1.0, 0.0])
q, w, nsq = ssw_py.solve_min_norm([[2.0, 0.0], [0.0, 2.0]])
assert abs(nsq - 2.0) < 1e-12 and abs(sum(w) - 1.0) < 1e-12
assert ssw_py.delta_p([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0]]) == (0.5, 0.0, 0.5)
assert ssw_py.median_iqr([5.0]) == (5.0, 0.0)
"#);
}

#[test]
fn problem_and_archive_classes() {
    run(r#"
p = ssw_py.Dtlz2(2, k=3)
assert (p.n_var, p.n_obj) == (4, 2)
f = p.evaluate([0.0, 0.5, 0.5, 0.5])
assert abs(f[0] - 1.0) < 1e-12 and abs(f[1]) < 1e-12
try:
    p.evaluate([2.0, 0.5, 0.5, 0.5])
    raise AssertionError("out-of-box point accepted")
except ValueError:
    pass
a = ssw_py.ParetoArchive(capacity=2)
for i in range(5):
    a.insert([float(i)], [float(i), 4.0 - i])
assert len(a) == 2
"#);
}

#[test]
fn runs_and_errors() {
    run(r#"
r = ssw_py.run_ssw(problem="quad2", k=2, population=10, budget=210, seed=3)
assert r.evaluations_used == 10 + 4 * 50 and r.generations_completed == 4
try:
    ssw_py.run_ssw(problem="nope")
    raise AssertionError("unknown problem accepted")
except ValueError:
    pass
try:
    ssw_py.run_ssw(budget=10)
    raise AssertionError("tiny budget accepted")
except ValueError:
    pass
"#);
}
