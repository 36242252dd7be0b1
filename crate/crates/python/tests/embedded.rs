use pyo3::prelude::*;
use pyo3::types::PyDict;

use rankset::rankset;

fn eval<'py>(py: Python<'py>, expr: &str) -> Bound<'py, PyAny> {
    let code = std::ffi::CString::new(expr).unwrap();
    let globals = PyDict::new(py);
    globals.set_item("rankset", py.import("rankset").unwrap()).unwrap();
    py.eval(&code, Some(&globals), None).unwrap_or_else(|e| panic!("{expr}: {e}"))
}

// One test: the inittab can only be extended before the interpreter starts.
#[test]
fn module_round_trip() {
    pyo3::append_to_inittab!(rankset);
    Python::initialize();
    Python::attach(|py| {
        let v: f64 = eval(py, "rankset.beta_cdf(2.0, 3.0, 0.4)").extract().unwrap();
        assert!((v - 0.5248).abs() < 1e-12);

        let q: f64 = eval(py, "rankset.Distribution('exp:1').quantile(0.5)").extract().unwrap();
        assert!((q - std::f64::consts::LN_2).abs() < 1e-12);

        let w: Vec<f64> = eval(py, "rankset.orss_weights(5, 5, 0.5)").extract().unwrap();
        assert_eq!(w.len(), 25);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);

        let rows: usize = eval(py, "len(rankset.simulate(rankset.Distribution('normal:0,1'), [(3, 2)], [0.5], replicates=50, seed=3))")
            .extract()
            .unwrap();
        assert_eq!(rows, 8);

        let err = py.run(c"import rankset; rankset.orss_weights(5, 3, 0.5, 'bogus')", None, None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = py.run(c"import rankset; rankset.rss_hd([[1.0, 2.0], [3.0]], 0.5)", None, None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
