//! Every runnable example doubles as a smoke test.

macro_rules! example {
    ($m:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $m;

        #[test]
        fn $m() {
            $m::example().expect(concat!($file, " should run"));
        }
    };
}

example!(games, "../examples/games.rs");
example!(heavy_ball, "../examples/heavy_ball.rs");
example!(modified_flow, "../examples/modified_flow.rs");
example!(stability, "../examples/stability.rs");
example!(optimal_momentum, "../examples/optimal_momentum.rs");
example!(alternating_rate, "../examples/alternating_rate.rs");
example!(slopes, "../examples/slopes.rs");
example!(adam, "../examples/adam.rs");
example!(run_config, "../examples/run_config.rs");
