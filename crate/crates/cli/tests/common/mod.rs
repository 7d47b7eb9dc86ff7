#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const FAKE: [&str; 6] = [
    "5G towers spread the virus, share before they delete this",
    "Drinking bleach cures covid says a doctor #miracle",
    "The vaccine has a microchip to track you 😷",
    "Bill Gates planned the pandemic years ago #plandemic",
    "Garlic water kills the coronavirus in minutes",
    "Hospitals are empty, the lockdown is a hoax #WakeUp",
];

pub const REAL: [&str; 6] = [
    "ICMR reports 1000 new testing labs across India",
    "Cases confirmed in Kerala today: 42 new, 10 recovered",
    "WHO updates guidance on testing and contact tracing",
    "The state health department released daily case numbers #COVID19",
    "Testing capacity increased to 50,000 samples per day",
    "Recovered patients discharged from the district hospital",
];

/// `n` labeled rows alternating fake and real, with a numbered suffix so
/// every text is distinct.
pub fn labeled_tsv(n: usize) -> String {
    let mut out = String::from("id\ttweet\tlabel\n");
    for i in 0..n {
        let (text, label) = if i % 2 == 0 { (FAKE[(i / 2) % FAKE.len()], "fake") } else { (REAL[(i / 2) % REAL.len()], "real") };
        out.push_str(&format!("{}\t{} {}\t{}\n", i + 1, text, i, label));
    }
    out
}

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infodemic")).args(args).output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `(id, label, p_fake)` rows of a predictions file, header skipped.
pub fn predictions(text: &str) -> Vec<(String, String, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}
