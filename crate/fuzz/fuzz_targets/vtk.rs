#![no_main]
use barrier_homotopy::vtk::parse_density_vtk;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(field) = parse_density_vtk(text) {
            assert_eq!(field.points.len(), field.rho.len());
            assert!(field.triangles.iter().flatten().all(|&v| v < field.points.len()));
        }
    }
});
