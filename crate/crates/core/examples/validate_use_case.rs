//! Checks a hand-written use case against the IMT-2030 ranges.

use netspec::ontology::{
    validate_use_case, CommunicationProcess, Direction, Metric, NetworkSpecification,
    SpecRangeConfig, UseCase,
};

fn main() {
    let ranges = SpecRangeConfig::default();
    let uc = UseCase::new(
        "Remote excavator",
        "An operator controls an excavator on a construction site from a remote cabin.",
    )
    .with_process(CommunicationProcess::new(
        "Control commands",
        "Joystick positions sent to the machine",
        true,
        Direction::Receive,
        "control",
        NetworkSpecification::default()
            .with(Metric::Latency, 5.0)
            .with(Metric::Reliability, 99.999),
    ))
    .with_process(CommunicationProcess::new(
        "Cabin video",
        "Stereo video returned to the operator",
        true,
        Direction::Transmit,
        "video",
        // Too good to be true: below the 0.1 ms floor.
        NetworkSpecification::default().with(Metric::Latency, 0.01),
    ));

    let report = validate_use_case(&uc, &ranges);
    println!("valid: {}", report.valid);
    for v in &report.violations {
        println!("  {} [{:?}] {}", v.path, v.code, v.detail);
    }
}
