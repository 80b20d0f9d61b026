use pcakernel::hilbert::{CurveBasis, CurveGrid, CurveTable};
use pcakernel::synthetic::{generate_process, CoefficientLaw, ProcessSpec};

#[test]
fn synthesized_curves_round_trip_through_text() {
    let spec = ProcessSpec::geometric(9, 0.5, CoefficientLaw::UniformSym, 31).unwrap();
    let xs = generate_process(&spec, 20).unwrap();
    let grid = CurveGrid::uniform(256, 0.0, 1.0).unwrap();
    let basis = CurveBasis::fourier(grid.clone(), 9).unwrap();
    let curves: Vec<Vec<f64>> = xs.iter().map(|x| basis.synthesize(x).unwrap()).collect();
    let table = CurveTable {
        abscissae: grid.points().to_vec(),
        curves,
    };
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    let back = CurveTable::read(buf.as_slice()).unwrap();
    assert_eq!(back, table);
    let coeffs = back.to_coefficients(&basis).unwrap();
    for (c, x) in coeffs.iter().zip(&xs) {
        for (a, b) in c.coeffs.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
