use pyo3::prelude::*;

#[pymodule]
fn screenflow(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
