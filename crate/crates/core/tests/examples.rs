macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect("example should run");
        }
    };
}

example!(projection, "projection.rs");
example!(spatial_queries, "spatial_queries.rs");
example!(keypoints, "keypoints.rs");
example!(foreground, "foreground.rs");
example!(dss, "dss.rs");
example!(frustum, "frustum.rs");
example!(evaluate, "evaluate.rs");
example!(synthetic_scene, "synthetic_scene.rs");
example!(unsupervised, "unsupervised.rs");
example!(supervised, "supervised.rs");
