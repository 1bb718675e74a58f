//! Agenda-based dialogue driver: a goal-directed user model and a
//! rule-based system policy take alternating turns until every task in the
//! goal is completed, then the exchange is realized into annotated turns.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Turn;
use crate::sim::acts::{SysAct, UserAct};
use crate::sim::entities::{EntityBank, EntityPool, DATES, PRICE_RANGES, TIMES};
use crate::sim::goal::{sample_goal, SlotConstraint, TaskGoal, UserGoal, UserProfile};
use crate::sim::nlg::{realize_system, realize_user};

/// Probability that the first candidate offered carries a value conflicting
/// with the user's stated constraint.
const CONFLICT_PROB: f64 = 0.3;
/// Probability that an aggressive user asks for alternatives once per task.
const REQUEST_ALTS_PROB: f64 = 0.3;
/// Consecutive non-answers allowed before the user is forced back on script.
const MAX_NON_ANSWERS: u8 = 2;
/// Backend relaxation rounds before the price filter is dropped entirely.
const MAX_RELAX: u8 = 2;

fn required_slots(domain: &str) -> &'static [&'static str] {
    match domain {
        "movies" => &["movie", "num_tickets", "date", "time", "theatre_name"],
        "find-restaurants" => &["category", "location", "price_range"],
        "reserve-restaurant" => &["restaurant_name", "num_people", "date", "time"],
        other => panic!("unknown domain {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Known {
    Value(String),
    DontCare,
}

/// Per-task dialogue state shared by the user model and the policy.
pub(crate) struct TaskState {
    domain: String,
    /// Goal constraints with cross-task references already resolved.
    constraints: BTreeMap<String, SlotConstraint>,
    /// What the system has learned so far.
    filled: BTreeMap<String, Known>,
    candidates: Option<Vec<Vec<(String, String)>>>,
    offer_idx: usize,
    offered: Option<Vec<(String, String)>>,
    /// Confirmed values once the task closes.
    result: BTreeMap<String, String>,
    relax_count: u8,
    alts_used: bool,
    non_answer_streak: u8,
    last_user: Vec<UserAct>,
    last_sys: Vec<SysAct>,
}

impl TaskState {
    fn new(domain: &str, constraints: BTreeMap<String, SlotConstraint>) -> Self {
        TaskState {
            domain: domain.to_string(),
            constraints,
            filled: BTreeMap::new(),
            candidates: None,
            offer_idx: 0,
            offered: None,
            result: BTreeMap::new(),
            relax_count: 0,
            alts_used: false,
            non_answer_streak: 0,
            last_user: Vec::new(),
            last_sys: Vec::new(),
        }
    }

    fn constraint_value(&self, slot: &str) -> Option<&str> {
        match self.constraints.get(slot) {
            Some(SlotConstraint::Value(v)) => Some(v),
            _ => None,
        }
    }

    fn record_inform(&mut self, slot: &str, value: &str) {
        self.filled
            .insert(slot.to_string(), Known::Value(value.to_string()));
    }

    fn next_unknown(&self) -> Option<&'static str> {
        required_slots(&self.domain)
            .iter()
            .find(|s| !self.filled.contains_key(**s))
            .copied()
    }

    fn pending_value_slots(&self) -> Vec<(String, String)> {
        self.constraints
            .iter()
            .filter(|(s, _)| !self.filled.contains_key(*s))
            .filter_map(|(s, c)| match c {
                SlotConstraint::Value(v) => Some((s.clone(), v.clone())),
                _ => None,
            })
            .collect()
    }
}

/// Resolve cross-task references against previously completed tasks.
fn resolve_constraints(
    task: &TaskGoal,
    results: &[BTreeMap<String, String>],
    goal: &UserGoal,
) -> BTreeMap<String, SlotConstraint> {
    task.constraints
        .iter()
        .map(|(slot, c)| {
            let resolved = match c {
                SlotConstraint::FromTask { task: t, slot: s } => {
                    let v = results[*t]
                        .get(s)
                        .cloned()
                        .or_else(|| match goal.tasks[*t].constraints.get(s) {
                            Some(SlotConstraint::Value(v)) => Some(v.clone()),
                            _ => None,
                        })
                        .expect("cross-reference target missing from earlier task");
                    SlotConstraint::Value(v)
                }
                other => other.clone(),
            };
            (slot.clone(), resolved)
        })
        .collect()
}

/// Opening user turn for a task: intent announcement plus volunteered slots.
fn announce_acts(st: &mut TaskState, profile: UserProfile, rng: &mut impl Rng) -> Vec<UserAct> {
    let mut pending = st.pending_value_slots();
    pending.shuffle(rng);
    let n = if profile.verbose {
        rng.gen_range(1..=3.min(pending.len().max(1)))
    } else {
        rng.gen_range(0..=1.min(pending.len()))
    };
    let informs: Vec<(String, String)> = pending.into_iter().take(n).collect();
    for (s, v) in &informs {
        st.record_inform(s, v);
    }
    let mut acts = vec![UserAct::TaskIntent {
        domain: st.domain.clone(),
    }];
    if !informs.is_empty() {
        acts.push(UserAct::Inform(informs));
    }
    acts
}

/// Build the offer list once every required slot is known.
fn build_candidates(
    st: &TaskState,
    bank: &EntityBank,
    pool: EntityPool,
    rng: &mut impl Rng,
) -> Vec<Vec<(String, String)>> {
    if st.domain == "find-restaurants" {
        let want = |slot: &str| match st.filled.get(slot) {
            Some(Known::Value(v)) => Some(v.clone()),
            _ => None,
        };
        let price = if st.relax_count >= MAX_RELAX {
            None
        } else {
            want("price_range")
        };
        let matches = bank.find_restaurants(
            pool,
            want("category").as_deref(),
            want("location").as_deref(),
            price.as_deref(),
        );
        let mut cands: Vec<Vec<(String, String)>> = matches
            .iter()
            .take(3)
            .map(|r| {
                vec![
                    ("restaurant_name".into(), r.name.clone()),
                    ("category".into(), r.category.clone()),
                    ("location".into(), r.location.clone()),
                ]
            })
            .collect();
        // Occasionally lead with a decoy whose cuisine conflicts, so offers
        // sometimes get rejected on a named slot.
        if !cands.is_empty() && rng.gen_bool(CONFLICT_PROB) {
            if let Some(cat) = want("category") {
                let decoys = bank.find_restaurants(pool, None, want("location").as_deref(), None);
                if let Some(d) = decoys.iter().find(|r| r.category != cat) {
                    cands.insert(
                        0,
                        vec![
                            ("restaurant_name".into(), d.name.clone()),
                            ("category".into(), d.category.clone()),
                            ("location".into(), d.location.clone()),
                        ],
                    );
                }
            }
        }
        cands
    } else {
        // Ticket bookings and reservations: synthesize (date, time) slates.
        let pick = |slot: &str, options: &[&str], rng: &mut dyn rand::RngCore, exact: bool| {
            match st.filled.get(slot) {
                Some(Known::Value(v)) if exact || rng.gen_bool(1.0 - CONFLICT_PROB) => v.clone(),
                _ => options.choose(rng).unwrap().to_string(),
            }
        };
        (0..3)
            .map(|i| {
                let exact = i > 0;
                vec![
                    ("date".into(), pick("date", &DATES, rng, exact)),
                    ("time".into(), pick("time", &TIMES, rng, exact)),
                ]
            })
            .collect()
    }
}

/// One system turn. Reads the user's last acts out of the state.
pub(crate) fn policy_step(
    st: &mut TaskState,
    bank: &EntityBank,
    pool: EntityPool,
    rng: &mut impl Rng,
) -> Vec<SysAct> {
    let user = st.last_user.clone();
    if user.contains(&UserAct::CantUnderstand) && !st.last_sys.is_empty() {
        return st.last_sys.clone();
    }
    if user.contains(&UserAct::UnknownIntent) {
        let mut acts = vec![SysAct::DidntUnderstand];
        acts.extend(st.last_sys.clone());
        return acts;
    }
    if let Some(offered) = st.offered.clone() {
        let accepted = user
            .iter()
            .any(|a| matches!(a, UserAct::Affirm | UserAct::AffirmSlot(_, _)));
        let rejected = user.iter().any(|a| {
            matches!(
                a,
                UserAct::Deny | UserAct::DenySlot(_) | UserAct::RequestAlts
            )
        });
        if accepted {
            for (s, v) in &offered {
                st.result.insert(s.clone(), v.clone());
            }
            for (s, k) in &st.filled {
                if let Known::Value(v) = k {
                    st.result.entry(s.clone()).or_insert_with(|| v.clone());
                }
            }
            return vec![SysAct::Confirm {
                domain: st.domain.clone(),
            }];
        }
        if rejected {
            st.offer_idx += 1;
            st.offered = None;
        }
    }
    if let Some(slot) = st.next_unknown() {
        return vec![SysAct::Request(slot.to_string())];
    }
    if st.candidates.is_none() {
        st.candidates = Some(build_candidates(st, bank, pool, rng));
        st.offer_idx = 0;
    }
    let cands = st.candidates.as_ref().unwrap();
    if let Some(c) = cands.get(st.offer_idx) {
        st.offered = Some(c.clone());
        return vec![SysAct::Offer {
            domain: st.domain.clone(),
            slots: c.clone(),
        }];
    }
    // Ran out of candidates: ask the user to relax a constraint.
    st.relax_count += 1;
    st.candidates = None;
    let relax = if st.domain == "find-restaurants" {
        "price_range"
    } else {
        "time"
    };
    st.filled.remove(relax);
    vec![SysAct::NoAvailability, SysAct::Request(relax.to_string())]
}

fn fresh_value(slot: &str, old: Option<&str>, rng: &mut impl Rng) -> String {
    let pool: &[&str] = match slot {
        "price_range" => &PRICE_RANGES,
        "date" => &DATES,
        "time" => &TIMES,
        other => panic!("no relaxation pool for {other}"),
    };
    loop {
        let v = pool.choose(rng).unwrap().to_string();
        if Some(v.as_str()) != old {
            return v;
        }
    }
}

fn answer_request(st: &mut TaskState, slot: &str, profile: UserProfile, rng: &mut impl Rng) -> Vec<UserAct> {
    st.non_answer_streak = 0;
    match st.constraints.get(slot).cloned() {
        Some(SlotConstraint::DontCare) => {
            st.filled.insert(slot.to_string(), Known::DontCare);
            vec![UserAct::DontCare(slot.to_string())]
        }
        Some(SlotConstraint::Value(v)) => {
            st.record_inform(slot, &v);
            let mut informs = vec![(slot.to_string(), v)];
            if profile.verbose && rng.gen_bool(0.5) {
                let mut extra = st.pending_value_slots();
                extra.shuffle(rng);
                for (s, v) in extra.into_iter().take(2) {
                    st.record_inform(&s, &v);
                    informs.push((s, v));
                }
            }
            vec![UserAct::Inform(informs)]
        }
        // Not part of the goal: the user genuinely has no preference.
        _ => {
            st.filled.insert(slot.to_string(), Known::DontCare);
            vec![UserAct::DontCare(slot.to_string())]
        }
    }
}

/// One user turn reacting to the system's acts.
pub(crate) fn user_step(
    st: &mut TaskState,
    sys: &[SysAct],
    profile: UserProfile,
    rng: &mut impl Rng,
) -> Vec<UserAct> {
    let no_availability = sys.contains(&SysAct::NoAvailability);
    let requested = sys.iter().find_map(|a| match a {
        SysAct::Request(s) => Some(s.clone()),
        _ => None,
    });
    let offered = sys.iter().find_map(|a| match a {
        SysAct::Offer { slots, .. } => Some(slots.clone()),
        _ => None,
    });

    if let Some(slot) = requested {
        if no_availability {
            // Relax: pick a new value for the slot the backend choked on.
            let old = st.constraint_value(&slot).map(str::to_string);
            let v = fresh_value(&slot, old.as_deref(), rng);
            st.constraints
                .insert(slot.clone(), SlotConstraint::Value(v.clone()));
            st.record_inform(&slot, &v);
            return vec![UserAct::Inform(vec![(slot, v)])];
        }
        if st.non_answer_streak < MAX_NON_ANSWERS && !rng.gen_bool(profile.answer_prob()) {
            st.non_answer_streak += 1;
            let pending = st.pending_value_slots();
            let choice = rng.gen_range(0..3);
            return match choice {
                0 => vec![UserAct::CantUnderstand],
                1 => vec![UserAct::UnknownIntent],
                _ if !pending.is_empty() => {
                    // Off-script: answer a different slot than the one asked.
                    let other = pending
                        .iter()
                        .find(|(s, _)| *s != slot)
                        .or(pending.first())
                        .cloned()
                        .unwrap();
                    st.record_inform(&other.0, &other.1);
                    vec![UserAct::Inform(vec![other])]
                }
                _ => vec![UserAct::CantUnderstand],
            };
        }
        return answer_request(st, &slot, profile, rng);
    }

    if let Some(slots) = offered {
        let conflict = slots
            .iter()
            .find(|(s, v)| st.constraint_value(s).is_some_and(|want| want != v));
        if let Some((slot, _)) = conflict {
            return if rng.gen_bool(0.5) {
                vec![UserAct::DenySlot(slot.clone())]
            } else {
                vec![UserAct::Deny]
            };
        }
        if !profile.cooperative && !st.alts_used && rng.gen_bool(REQUEST_ALTS_PROB) {
            st.alts_used = true;
            return vec![UserAct::RequestAlts];
        }
        return if rng.gen_bool(0.5) {
            let (s, v) = slots.choose(rng).unwrap().clone();
            vec![UserAct::AffirmSlot(s, v)]
        } else {
            vec![UserAct::Affirm]
        };
    }

    // DidntUnderstand with nothing re-asked, or a bare greeting: repeat intent.
    vec![UserAct::CantUnderstand]
}

/// A fully simulated dialogue with its sampled metadata.
pub struct SimulatedDialogue {
    pub turns: Vec<Turn>,
    pub goal: UserGoal,
    pub profile: UserProfile,
    /// Confirmed slot values per completed task.
    pub results: Vec<BTreeMap<String, String>>,
}

/// Run one dialogue to completion. `domain` fixes a single-domain goal;
/// `None` samples a multi-domain goal.
pub fn simulate_dialogue(
    rng: &mut impl Rng,
    bank: &EntityBank,
    pool: EntityPool,
    domain: Option<&str>,
) -> SimulatedDialogue {
    let goal = sample_goal(rng, bank, pool, domain);
    let profile = UserProfile::sample(rng);
    let mut turns: Vec<Turn> = Vec::new();
    let mut results: Vec<BTreeMap<String, String>> = Vec::new();

    if rng.gen_bool(0.5) {
        turns.push(realize_system(&[SysAct::Greeting], rng));
    }

    for task in &goal.tasks {
        let constraints = resolve_constraints(task, &results, &goal);
        let mut st = TaskState::new(&task.domain, constraints);
        let mut acts = Vec::new();
        if turns.is_empty() && rng.gen_bool(0.3) {
            acts.push(UserAct::Greeting);
        }
        acts.extend(announce_acts(&mut st, profile, rng));
        turns.push(realize_user(&acts, &st.domain, rng));
        st.last_user = acts;

        loop {
            let sys = policy_step(&mut st, bank, pool, rng);
            turns.push(realize_system(&sys, rng));
            if sys.iter().any(|a| matches!(a, SysAct::Confirm { .. })) {
                results.push(std::mem::take(&mut st.result));
                break;
            }
            st.last_sys = sys.clone();
            let uacts = user_step(&mut st, &sys, profile, rng);
            turns.push(realize_user(&uacts, &st.domain, rng));
            st.last_user = uacts;
        }
    }

    let last_domain = goal.tasks.last().unwrap().domain.clone();
    let mut closing = vec![UserAct::ThankYou];
    if rng.gen_bool(0.5) {
        closing.push(UserAct::GoodBye);
    }
    turns.push(realize_user(&closing, &last_domain, rng));
    if rng.gen_bool(0.5) {
        turns.push(realize_system(&[SysAct::GoodBye], rng));
    }

    SimulatedDialogue {
        turns,
        goal,
        profile,
        results,
    }
}
