//! Regenerates `data/german_synthetic.csv`, the bundled demo dataset.
//!
//! The file mimics the shape of the public German credit data (1000 rows,
//! 6 numeric columns, 13 categorical columns, a binary gender attribute,
//! a good/bad credit-risk label) so the end-to-end pipeline can run out of
//! the box: after one-hot encoding with the gender column included it has
//! 27 feature columns. It is generated, not real: a latent
//! creditworthiness score drives both the label and several columns, the
//! label is biased toward "good" for men and away from it for women, and
//! the housing column is strongly gender-correlated so a plain model picks
//! the bias up through more than one path.
//!
//! Run with: `cargo run -p fairlens-cli --example make_demo_data`

use fairlens::numerics::Rng;
use std::io::Write;

fn pick<'a>(rng: &mut Rng, levels: &[(&'a str, f64)]) -> &'a str {
    let mut u = rng.next_f64();
    for (name, p) in levels {
        if u < *p {
            return name;
        }
        u -= p;
    }
    levels.last().unwrap().0
}

fn main() {
    let out_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/german_synthetic.csv");
    let mut rng = Rng::new(0x6E12_3A7);
    let n = 1000;

    let mut file = std::fs::File::create(out_path).expect("create csv");
    writeln!(
        file,
        "checking_status,credit_history,purpose,savings,employment_since,housing,job,\
         telephone,foreign_worker,other_debtors,property,other_installment_plans,own_car,\
         duration_months,credit_amount,installment_rate,age,existing_credits,num_dependents,\
         gender,credit_risk"
    )
    .unwrap();

    for _ in 0..n {
        let male = rng.bernoulli(0.69);
        let gender = if male { "male" } else { "female" };

        let age = (35.0 + 10.0 * rng.next_normal()).clamp(19.0, 75.0).round();
        let duration = (21.0 + 12.0 * rng.next_normal()).clamp(4.0, 72.0).round();
        let log_amount = 8.0 + 0.8 * rng.next_normal();
        let amount = log_amount.exp().round().clamp(250.0, 20_000.0);
        let installment_rate = 1 + rng.next_below(4);
        let existing_credits = 1 + rng.next_below(3);
        let num_dependents = 1 + rng.next_below(2);

        // Latent creditworthiness: short, small, older-applicant loans
        // score higher.
        let u = 0.6 * (age - 35.0) / 10.0 - 0.8 * (duration - 21.0) / 12.0
            - 0.6 * (log_amount - 8.0) / 0.8
            + 0.5 * rng.next_normal();

        // Label bias: men get pushed toward "good", women away from it.
        let shift = if male { 0.35 } else { -0.35 };
        let good = u + shift + 0.4 * rng.next_normal() > -0.55;

        // Gender-correlated housing (leakage channel beyond the gender
        // column itself).
        let housing = if male {
            pick(&mut rng, &[("own", 0.75), ("rent", 0.20), ("free", 0.05)])
        } else {
            pick(&mut rng, &[("own", 0.35), ("rent", 0.55), ("free", 0.10)])
        };
        // Mildly label-informative categoricals.
        let checking = if u > 0.3 {
            pick(&mut rng, &[("none", 0.5), ("low", 0.3), ("mid", 0.2)])
        } else {
            pick(&mut rng, &[("none", 0.2), ("low", 0.5), ("mid", 0.3)])
        };
        let history = if u > 0.0 {
            pick(&mut rng, &[("good", 0.6), ("fair", 0.3), ("poor", 0.1)])
        } else {
            pick(&mut rng, &[("good", 0.3), ("fair", 0.4), ("poor", 0.3)])
        };
        let purpose = pick(
            &mut rng,
            &[("car", 0.4), ("furniture", 0.35), ("education", 0.25)],
        );
        let savings = pick(&mut rng, &[("none", 0.6), ("small", 0.25), ("large", 0.15)]);
        let employment = pick(
            &mut rng,
            &[("short", 0.3), ("medium", 0.4), ("long", 0.3)],
        );
        let job = pick(
            &mut rng,
            &[("unskilled", 0.25), ("skilled", 0.6), ("management", 0.15)],
        );
        let telephone = pick(&mut rng, &[("no", 0.6), ("yes", 0.4)]);
        let foreign = pick(&mut rng, &[("yes", 0.95), ("no", 0.05)]);
        let debtors = pick(&mut rng, &[("none", 0.9), ("guarantor", 0.1)]);
        let property = pick(&mut rng, &[("real_estate", 0.55), ("none", 0.45)]);
        let plans = pick(&mut rng, &[("none", 0.8), ("bank", 0.2)]);
        let own_car = pick(&mut rng, &[("no", 0.55), ("yes", 0.45)]);

        writeln!(
            file,
            "{checking},{history},{purpose},{savings},{employment},{housing},{job},\
             {telephone},{foreign},{debtors},{property},{plans},{own_car},\
             {duration},{amount},{installment_rate},{age},{existing_credits},{num_dependents},\
             {gender},{}",
            if good { "good" } else { "bad" }
        )
        .unwrap();
    }
    println!("wrote {out_path}");
}
