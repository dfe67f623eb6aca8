#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim_service::x3d::{export_mesh, import, Precision};

// Imported meshes re-export and re-import exactly.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(shapes) = import(text) else { return };
    for shape in shapes {
        if shape.mesh.triangle_count() == 0 {
            continue;
        }
        let again = import(&export_mesh(&shape.mesh, Precision::Exact)).unwrap();
        assert_eq!(again[0].mesh, shape.mesh);
    }
});
