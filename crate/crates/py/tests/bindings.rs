use pyo3::ffi::c_str;
use pyo3::prelude::*;

use climscan_py::climscan_py;

fn run(code: &std::ffi::CStr) {
    pyo3::append_to_inittab!(climscan_py);
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn module_round_trip() {
    run(c_str!(
        r#"
import climscan_py as cs, tempfile
assert cs.reconstruct_abstract({"Climate": [0], "change": [1], "is": [2], "real": [3]}) == "Climate change is real"
assert abs(cs.cohens_kappa([1,1,1,0,0,0,1,0,1,1], [1,1,0,0,0,0,1,0,1,1]) - 0.8) < 1e-12
assert cs.q1_filter({"A": 0.9, "B": 0.6, "C": 0.5}, 0.6) == ["A", "B"]
try:
    cs.parse_response('{"Q1":1,"Q2":1,"Q3":11,"Q4":1,"Q5":1,"Q6":1,"Q7":1}', "scalar10")
    raise AssertionError("range error expected")
except cs.ClimscanError as e:
    assert "Q3" in str(e)
fit = cs.fit_logistic([[x, 0, 0, 0, 0, 0] for x in (0.9, 0.8, 0.2, 0.1)], [1, 1, 0, 0])
assert abs(sum(fit.weights.values()) - 1) < 1e-9
with tempfile.TemporaryDirectory() as d:
    fit.save(d + "/w.json")
    assert cs.WeightVector.load(d + "/w.json").beta == fit.beta
"#
    ));
}
