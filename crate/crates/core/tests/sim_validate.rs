mod common;

use common::{compile_desk, Setup};
use fhesched::compiler::{CycleSchedule, Event, TimedEvent};
use fhesched::dsl::build_matvec;
use fhesched::sim::{validate_and_run, ViolationKind};

fn rebuild(s: &CycleSchedule, events: &[TimedEvent]) -> CycleSchedule {
    CycleSchedule::from_events(
        s.n,
        s.slots,
        s.total_cycles,
        s.objects.clone(),
        s.outputs.clone(),
        s.aliases.clone(),
        events,
    )
}

#[test]
fn matvec_runs_clean_and_decrypts() {
    let p = build_matvec(4, 64, 4).unwrap();
    let setup = Setup::new(&p, 4, 3);
    let (c, config) = compile_desk(&p, &setup, 72);
    let image = setup.image(&p, &c);
    let r = validate_and_run(&c.schedule, &c.dfg, &config, Some(&image));
    assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(5)]);
    assert_eq!(r.stats.total_cycles, c.schedule.total_cycles);
    assert!(setup.outputs_match(&p, &c, r.memory.as_ref().unwrap()));
    let t = r.stats.traffic;
    assert_eq!(t.classified_total(), t.total);
    assert!(r.stats.peak_resident_bytes <= 72 * config.vector_bytes(64));
}

#[test]
fn early_exec_is_flagged() {
    let p = build_matvec(2, 64, 4).unwrap();
    let setup = Setup::new(&p, 4, 5);
    let (c, config) = compile_desk(&p, &setup, 72);
    let mut events = c.schedule.events();
    let i = events
        .iter()
        .position(|e| matches!(e.event, Event::Exec { .. }) && e.cycle > 0)
        .unwrap();
    events[i].cycle -= 1;
    let bad = rebuild(&c.schedule, &events);
    let image = setup.image(&p, &c);
    let r = validate_and_run(&bad, &c.dfg, &config, Some(&image));
    assert!(!r.passed());
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::Dependency));
}

#[test]
fn shared_slot_is_a_clobber() {
    let p = build_matvec(2, 64, 4).unwrap();
    let setup = Setup::new(&p, 4, 5);
    let (c, config) = compile_desk(&p, &setup, 72);
    let mut events = c.schedule.events();
    let loads: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.event, Event::Load { .. }))
        .map(|(i, _)| i)
        .take(2)
        .collect();
    let Event::Load { slot, .. } = events[loads[0]].event else {
        unreachable!()
    };
    if let Event::Load { slot: s, .. } = &mut events[loads[1]].event {
        *s = slot;
    }
    let r = validate_and_run(&rebuild(&c.schedule, &events), &c.dfg, &config, None);
    assert!(
        r.violations.iter().any(|v| v.kind == ViolationKind::Clobber),
        "{:?}",
        r.violations
    );
}

#[test]
fn unit_conflict_is_flagged() {
    let p = build_matvec(2, 64, 4).unwrap();
    let setup = Setup::new(&p, 4, 5);
    let (c, config) = compile_desk(&p, &setup, 72);
    let events = c.schedule.events();
    let execs: Vec<&TimedEvent> = events
        .iter()
        .filter(|e| matches!(e.event, Event::Exec { .. }))
        .collect();
    let (a, b) = (execs[0], execs[1]);
    let mut events = events.clone();
    let j = events.iter().position(|e| e == b).unwrap();
    let Event::Exec {
        cluster, kind, unit, ..
    } = a.event
    else {
        unreachable!()
    };
    if let Event::Exec {
        cluster: c2,
        kind: k2,
        unit: u2,
        ..
    } = &mut events[j].event
    {
        if *k2 == kind {
            *c2 = cluster;
            *u2 = unit;
            events[j].cycle = a.cycle;
        }
    }
    let r = validate_and_run(&rebuild(&c.schedule, &events), &c.dfg, &config, None);
    if matches!(b.event, Event::Exec { kind: k, .. } if k == kind) {
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::UnitConflict));
    }
}

#[test]
fn tiny_register_file_is_a_capacity_violation() {
    let p = build_matvec(2, 64, 4).unwrap();
    let setup = Setup::new(&p, 4, 5);
    let (c, mut config) = compile_desk(&p, &setup, 72);
    config.rf_vectors_per_cluster = 1;
    let r = validate_and_run(&c.schedule, &c.dfg, &config, None);
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::Capacity));
}

mod random {
    use super::common::Setup;
    use fhesched::compiler::{compile, DmsAction, Ordering};
    use fhesched::dsl::{random_program, RandomProgramConfig};
    use fhesched::sim::{validate_and_run, MachineConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_programs_cosimulate(seed in 0u64..1000, slots in prop::sample::select(vec![20usize, 32, 64, 400])) {
            let mut cfg = RandomProgramConfig::new(16, 3, 2);
            cfg.ops = 6;
            cfg.inputs = 2;
            let p = random_program(&cfg, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let setup = Setup::new(&p, 3, seed);
            let config = MachineConfig::desk(16, 8, slots);
            let c = match compile(&p, &setup.params, &config, Ordering::HintReuse) {
                Ok(c) => c,
                Err(fhesched::compiler::CompileError::Infeasible { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let spills = c.dms.actions.iter().filter(|a| matches!(a, DmsAction::Spill { .. })).count();
            let r = validate_and_run(&c.schedule, &c.dfg, &config, Some(&setup.image(&p, &c)));
            prop_assert!(r.passed(), "slots {} spills {}: {:?}", slots, spills, &r.violations[..r.violations.len().min(3)]);
            let mem = r.memory.as_ref().unwrap();
            prop_assert!(setup.outputs_equal_reference(&p, &c, mem));
            prop_assert_eq!(setup.outputs_match(&p, &c, mem), setup.reference_decrypts(&p));
        }
    }
}

#[test]
fn spills_round_trip_through_memory() {
    use fhesched::compiler::DmsAction;
    use fhesched::dsl::{random_program, RandomProgramConfig};
    use rand::SeedableRng;
    let mut found = false;
    for seed in 0..20 {
        let mut cfg = RandomProgramConfig::new(16, 3, 2);
        cfg.ops = 10;
        let p = random_program(&cfg, &mut rand_chacha::ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let setup = Setup::new(&p, 3, seed);
        let config = fhesched::sim::MachineConfig::desk(16, 8, 16);
        let Ok(c) = fhesched::compiler::compile(&p, &setup.params, &config, fhesched::compiler::Ordering::HintReuse)
        else {
            continue;
        };
        if !c.dms.actions.iter().any(|a| matches!(a, DmsAction::Spill { .. })) {
            continue;
        }
        found = true;
        let r = validate_and_run(&c.schedule, &c.dfg, &config, Some(&setup.image(&p, &c)));
        assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(3)]);
        assert!(setup.outputs_equal_reference(&p, &c, r.memory.as_ref().unwrap()));
        assert!(r.stats.traffic.intermediate_store > 0);
    }
    assert!(found, "no program spilled");
}
