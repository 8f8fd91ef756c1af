macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(fig3_walkthrough, "fig3_walkthrough.rs");
example!(sync_elimination, "sync_elimination.rs");
example!(indistinguishable, "indistinguishable.rs");
example!(decode_rate, "decode_rate.rs");
example!(throughput_sweep, "throughput_sweep.rs");
example!(trace_roundtrip, "trace_roundtrip.rs");
