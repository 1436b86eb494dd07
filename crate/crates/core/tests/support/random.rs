//! Seeded generator of small scenarios over the fixture norms.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tnorm::kb::{Timestamp, Value};
use tnorm::runtime::EventRecord;

use super::{ts, Scenario};

/// A norm file (with its exceptions) and the background it relies on.
struct Group {
    norms: &'static [&'static str],
    background: &'static [&'static str],
    kinds: &'static [Kind],
}

#[derive(Clone, Copy)]
enum Kind {
    Access,
    Payment,
    Release,
    Lend,
    Swab,
    Leave,
    Fire,
    Bell,
    Enter,
    Pass,
    ParkIn,
    ParkOut,
    Shop,
    Agreement,
    Sell,
    License,
    Reproduce,
    Seizure,
    Destroy,
}

const GROUPS: &[Group] = &[
    Group { norms: &["norm01", "ambulance"], background: &["milan"], kinds: &[Kind::Access, Kind::Payment] },
    Group { norms: &["norm02", "teacher"], background: &["library"], kinds: &[Kind::Release, Kind::Lend] },
    Group { norms: &["norm03", "fire"], background: &["housing"], kinds: &[Kind::Swab, Kind::Leave, Kind::Fire] },
    Group { norms: &["norm04"], background: &["school"], kinds: &[Kind::Bell, Kind::Enter] },
    Group { norms: &["norm05"], background: &[], kinds: &[Kind::Pass] },
    Group {
        norms: &["norm07"],
        background: &["parking"],
        kinds: &[Kind::ParkIn, Kind::ParkOut, Kind::Shop, Kind::Payment],
    },
    Group { norms: &["transfer"], background: &["commerce"], kinds: &[Kind::Agreement, Kind::Sell] },
    Group { norms: &["usage"], background: &["commerce"], kinds: &[Kind::License, Kind::Reproduce] },
    Group { norms: &["seizure"], background: &["commerce"], kinds: &[Kind::Seizure, Kind::Sell, Kind::Destroy] },
];

const AGENTS: &[&str] = &["alice", "bob", "carol", "teacher1"];

/// Gaps between consecutive events, in minutes: from the 5 minute
/// classroom window to the 2 year lending ban.
const GAPS: &[i64] = &[0, 1, 3, 7, 60, 300, 1_440, 14_400, 43_200, 525_600];

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty")
}

fn r(name: &str) -> Value {
    Value::resource(name)
}

fn event(rng: &mut ChaCha8Rng, kind: Kind, id: &str, time: Timestamp, earlier: &[EventRecord]) -> EventRecord {
    let agent = r(pick(rng, AGENTS));
    let e = |classes: &[&str]| EventRecord::new(id, classes, time);
    match kind {
        Kind::Access => e(&["RestrictedTrafficAreaAccess"]).with("vehicle", r(pick(rng, &["car1", "car2", "amb1"]))),
        Kind::Payment => {
            let accesses: Vec<&str> = earlier
                .iter()
                .filter(|x| x.classes.iter().any(|c| c == "RestrictedTrafficAreaAccess"))
                .map(|x| x.id.as_str())
                .collect();
            let mut ev = e(&["PayAction"]).with("actor", agent);
            if let Some(reason) = accesses.choose(rng) {
                ev = ev
                    .with("reason", r(reason))
                    .with("recipient", Value::text("Milan"))
                    .with("price", Value::Integer(*pick(rng, &[5, 6, 6])))
                    .with("priceCurrency", r("euro"));
            } else {
                ev = ev.with("recipient", r(pick(rng, &["lot1", "lot2"])));
            }
            ev
        }
        Kind::Release => e(&["isReleased"])
            .with("object", r(pick(rng, &["dvd1", "dvd2", "book1"])))
            .with("place", r(pick(rng, &["Italy", "Italy", "France"]))),
        Kind::Lend => e(&["LendAction"]).with("object", r(pick(rng, &["dvd1", "dvd2"]))).with("actor", agent),
        Kind::Swab => e(&["PositiveSwab"]).with("affectedPerson", r(pick(rng, &["alice", "bob"]))),
        Kind::Leave => e(&["LeaveHouse"]).with("actor", agent),
        Kind::Fire => e(&["Fire"]).with("place", r(pick(rng, &["house1", "house2"]))),
        Kind::Bell => e(&["BellRing"]).with("school", r("school1")),
        Kind::Enter => e(&["EnterClassroom"]).with("place", r("school1")).with("actor", agent),
        Kind::Pass => e(&["PassTrafficLight"]).with("lightColor", r(pick(rng, &["red", "green"]))).with("actor", agent),
        Kind::ParkIn => e(&["ParkingEntry"]).with("parking", r(pick(rng, &["lot1", "lot2"]))).with("actor", agent),
        Kind::ParkOut => e(&["ParkingExit"]).with("parking", r(pick(rng, &["lot1", "lot2"]))).with("actor", agent),
        Kind::Shop => e(&["ShoppingAction"]).with("actor", agent),
        Kind::Agreement => e(&["SaleAgreement"]).with("seller", agent).with("good", r(pick(rng, &["g1", "g2"]))),
        Kind::Sell => {
            let class = *pick(rng, &["SellAction", "TransferAction"]);
            e(&[class]).with("object", r(pick(rng, &["g1", "g2"]))).with("actor", agent)
        }
        Kind::License => {
            let offset = *pick(rng, &[-60, 0, 60, 1_440, 43_200]);
            let starts = time.add_millis(offset * 60_000).expect("in range");
            e(&["LicenseGranted"]).with("work", r("w1")).with("startsAt", Value::Timestamp(starts))
        }
        Kind::Reproduce => {
            let class = *pick(rng, &["ReproduceAction", "UseAction"]);
            e(&[class]).with("object", r("w1")).with("actor", agent)
        }
        Kind::Seizure => e(&["SeizureOrder"]).with("good", r(pick(rng, &["g1", "g2"]))),
        Kind::Destroy => e(&["DisposeAction"]).with("object", r(pick(rng, &["g1", "g2"]))).with("actor", agent),
    }
}

/// A scenario with up to three norm groups and at most ten events.
pub fn scenario(rng: &mut ChaCha8Rng, name: &str) -> Scenario {
    let count = rng.gen_range(1..=3);
    let groups: Vec<&Group> = GROUPS.choose_multiple(rng, count).collect();
    let mut norms: Vec<&str> = Vec::new();
    let mut background: Vec<&str> = Vec::new();
    let mut kinds: Vec<Kind> = Vec::new();
    for g in &groups {
        norms.extend(g.norms);
        for b in g.background {
            if !background.contains(b) {
                background.push(b);
            }
        }
        kinds.extend(g.kinds);
    }
    let n = rng.gen_range(0..=10);
    let mut time = ts("2021-03-01T06:00:00Z").add_millis(rng.gen_range(0..720) * 60_000).unwrap();
    let mut events: Vec<EventRecord> = Vec::new();
    for i in 0..n {
        if i > 0 {
            time = time.add_millis(pick(rng, GAPS) * 60_000).unwrap();
        }
        let kind = *pick(rng, &kinds);
        let ev = event(rng, kind, &format!("x{i}"), time, &events);
        events.push(ev);
    }
    Scenario::new(name, &norms, &background, events)
}
