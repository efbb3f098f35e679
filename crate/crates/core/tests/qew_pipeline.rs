use depin::certificate::Tolerances;
use depin::field::{ObstacleShape, StrengthDistribution};
use depin::qew::{certify, choose_parameters, default_headroom, sample_construction_field, CertifyOptions, QewRecipe, SupersolutionQew};

fn fixture(seed: u64) -> SupersolutionQew {
    let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
    let dist = StrengthDistribution::Constant { value: 10.0 };
    let params = choose_parameters(&shape, 1.0, &dist, &QewRecipe::default()).unwrap();
    let cap = 12;
    let field =
        sample_construction_field(&params, &shape, dist, &[8], cap, default_headroom(&params), seed).unwrap();
    SupersolutionQew::build(field, &params, vec![8], cap).unwrap()
}

#[test]
fn certificate_passes_at_f_star_and_fails_far_above() {
    for seed in [1u64, 2, 3] {
        let s = fixture(seed);
        let opts = CertifyOptions { spacing: 0.02, tolerances: Tolerances::default(), keep: 5 };
        let ok = certify(&s, s.params.f_star, &opts);
        println!("{}", ok.to_text());
        assert!(ok.pass, "seed {seed}");
        let bad = certify(&s, 10.0 * s.params.f_star, &opts);
        assert!(!bad.pass);
        assert!(bad.worst.iter().any(|w| !w.inner));
    }
}
