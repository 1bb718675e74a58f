//! User goals and behavioral profiles.
//!
//! A goal is an ordered list of tasks, each a domain plus per-slot
//! constraints. Multi-task goals may reference a value produced by an
//! earlier task (reuse the restaurant that was found, or reserve on the
//! same date as the movie).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{domain_slots, DOMAINS};
use crate::sim::entities::{EntityBank, EntityPool, DATES, NUMBERS, TIMES};

/// Probability that an optional-preference slot becomes DontCare.
pub const DONT_CARE_PROB: f64 = 0.2;
/// Probability that a multi-task goal links a later task to an earlier one.
pub const CROSS_REF_PROB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotConstraint {
    /// The user wants this exact value.
    Value(String),
    /// The user will accept anything offered for this slot.
    DontCare,
    /// Resolved at dialogue time from task `task`'s outcome.
    FromTask { task: usize, slot: String },
}

#[derive(Debug, Clone)]
pub struct TaskGoal {
    pub domain: String,
    pub constraints: BTreeMap<String, SlotConstraint>,
}

#[derive(Debug, Clone)]
pub struct UserGoal {
    pub tasks: Vec<TaskGoal>,
}

/// Cooperative users answer the requested slot; aggressive ones go off
/// script more often. Verbose users volunteer extra slots per turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserProfile {
    pub cooperative: bool,
    pub verbose: bool,
}

impl UserProfile {
    pub fn sample(rng: &mut impl Rng) -> Self {
        UserProfile {
            cooperative: rng.gen_bool(0.5),
            verbose: rng.gen_bool(0.5),
        }
    }

    /// Probability of directly answering a requested slot.
    pub fn answer_prob(&self) -> f64 {
        if self.cooperative {
            0.9
        } else {
            0.75
        }
    }
}

fn value_or_dont_care(rng: &mut impl Rng, value: String) -> SlotConstraint {
    if rng.gen_bool(DONT_CARE_PROB) {
        SlotConstraint::DontCare
    } else {
        SlotConstraint::Value(value)
    }
}

fn movies_goal(rng: &mut impl Rng, bank: &EntityBank, pool: EntityPool) -> TaskGoal {
    let mut c = BTreeMap::new();
    c.insert(
        "movie".into(),
        SlotConstraint::Value(bank.sample_movie(rng, pool).to_string()),
    );
    c.insert(
        "num_tickets".into(),
        SlotConstraint::Value(NUMBERS.choose(rng).unwrap().to_string()),
    );
    let theatre = bank.sample_theatre(rng, pool).to_string();
    c.insert("theatre_name".into(), value_or_dont_care(rng, theatre));
    let date = DATES.choose(rng).unwrap().to_string();
    c.insert("date".into(), value_or_dont_care(rng, date));
    let time = TIMES.choose(rng).unwrap().to_string();
    c.insert("time".into(), value_or_dont_care(rng, time));
    TaskGoal {
        domain: "movies".into(),
        constraints: c,
    }
}

fn find_goal(rng: &mut impl Rng, bank: &EntityBank, pool: EntityPool) -> TaskGoal {
    // Anchor on a real restaurant so the backend always has at least one hit
    // for the hard constraints.
    let anchor = bank.sample_restaurant(rng, pool).clone();
    let mut c = BTreeMap::new();
    c.insert("category".into(), SlotConstraint::Value(anchor.category));
    c.insert("location".into(), SlotConstraint::Value(anchor.location));
    let price = anchor.price_range.clone();
    c.insert("price_range".into(), value_or_dont_care(rng, price));
    if rng.gen_bool(0.4) {
        let meal = anchor.meal.clone();
        c.insert("meal".into(), value_or_dont_care(rng, meal));
    }
    if rng.gen_bool(0.4) {
        let rating = anchor.rating.clone();
        c.insert("rating".into(), value_or_dont_care(rng, rating));
    }
    TaskGoal {
        domain: "find-restaurants".into(),
        constraints: c,
    }
}

fn reserve_goal(rng: &mut impl Rng, bank: &EntityBank, pool: EntityPool) -> TaskGoal {
    let mut c = BTreeMap::new();
    c.insert(
        "restaurant_name".into(),
        SlotConstraint::Value(bank.sample_restaurant(rng, pool).name.clone()),
    );
    c.insert(
        "num_people".into(),
        SlotConstraint::Value(NUMBERS.choose(rng).unwrap().to_string()),
    );
    let date = DATES.choose(rng).unwrap().to_string();
    c.insert("date".into(), value_or_dont_care(rng, date));
    let time = TIMES.choose(rng).unwrap().to_string();
    c.insert("time".into(), value_or_dont_care(rng, time));
    TaskGoal {
        domain: "reserve-restaurant".into(),
        constraints: c,
    }
}

fn task_for(domain: &str, rng: &mut impl Rng, bank: &EntityBank, pool: EntityPool) -> TaskGoal {
    match domain {
        "movies" => movies_goal(rng, bank, pool),
        "find-restaurants" => find_goal(rng, bank, pool),
        "reserve-restaurant" => reserve_goal(rng, bank, pool),
        other => panic!("unknown domain {other}"),
    }
}

/// Sample a goal. Single-domain goals fix the domain; multi-domain goals
/// chain 2-3 distinct domains and may cross-reference an earlier task.
pub fn sample_goal(
    rng: &mut impl Rng,
    bank: &EntityBank,
    pool: EntityPool,
    domain: Option<&str>,
) -> UserGoal {
    let mut tasks = match domain {
        Some(d) => vec![task_for(d, rng, bank, pool)],
        None => {
            let mut domains: Vec<&str> = DOMAINS.to_vec();
            domains.shuffle(rng);
            let n = if rng.gen_bool(0.3) { 3 } else { 2 };
            domains[..n]
                .iter()
                .map(|d| task_for(d, rng, bank, pool))
                .collect()
        }
    };
    if tasks.len() > 1 && rng.gen_bool(CROSS_REF_PROB) {
        link_tasks(&mut tasks);
    }
    UserGoal { tasks }
}

/// Rewrite one later-task constraint into a reference to an earlier task.
/// Reservations can reuse the restaurant found earlier, or the movie date.
fn link_tasks(tasks: &mut [TaskGoal]) {
    let pos = |d: &str| tasks.iter().position(|t| t.domain == d);
    let (find, movies, reserve) = (
        pos("find-restaurants"),
        pos("movies"),
        pos("reserve-restaurant"),
    );
    let Some(r) = reserve else { return };
    if let Some(f) = find.filter(|f| *f < r) {
        tasks[r].constraints.insert(
            "restaurant_name".into(),
            SlotConstraint::FromTask {
                task: f,
                slot: "restaurant_name".into(),
            },
        );
    } else if let Some(m) = movies.filter(|m| *m < r) {
        if matches!(
            tasks[m].constraints.get("date"),
            Some(SlotConstraint::Value(_))
        ) {
            tasks[r].constraints.insert(
                "date".into(),
                SlotConstraint::FromTask {
                    task: m,
                    slot: "date".into(),
                },
            );
        }
    }
}

/// Every constraint names a slot from its own domain inventory, and every
/// cross-reference points backwards at a task that carries that slot.
pub fn validate_goal(goal: &UserGoal) -> bool {
    goal.tasks.iter().enumerate().all(|(i, t)| {
        let own = domain_slots(&t.domain);
        t.constraints.iter().all(|(slot, c)| {
            own.contains(&slot.as_str())
                && match c {
                    SlotConstraint::FromTask { task, slot } => {
                        *task < i
                            && domain_slots(&goal.tasks[*task].domain).contains(&slot.as_str())
                    }
                    _ => true,
                }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn goals_are_valid() {
        let bank = EntityBank::new(3);
        for i in 0..300 {
            let mut r = rng::stream(3, "goal-test", i);
            let g = sample_goal(&mut r, &bank, EntityPool::Train, None);
            assert!(validate_goal(&g), "invalid goal: {g:?}");
            assert!(g.tasks.len() >= 2);
        }
        for d in DOMAINS {
            let mut r = rng::labeled(3, d);
            let g = sample_goal(&mut r, &bank, EntityPool::Full, Some(d));
            assert!(validate_goal(&g));
            assert_eq!(g.tasks.len(), 1);
            assert_eq!(g.tasks[0].domain, d);
        }
    }

    #[test]
    fn dont_care_rate_matches_parameter() {
        let bank = EntityBank::new(3);
        let (mut dc, mut eligible) = (0usize, 0usize);
        for i in 0..2000 {
            let mut r = rng::stream(3, "dc-test", i);
            let g = sample_goal(&mut r, &bank, EntityPool::Train, None);
            for t in &g.tasks {
                for (slot, c) in &t.constraints {
                    // Identity slots are never DontCare by construction.
                    let fixed = matches!(
                        (t.domain.as_str(), slot.as_str()),
                        ("movies", "movie" | "num_tickets")
                            | ("find-restaurants", "category" | "location")
                            | ("reserve-restaurant", "restaurant_name" | "num_people")
                    );
                    if !fixed && !matches!(c, SlotConstraint::FromTask { .. }) {
                        eligible += 1;
                        if *c == SlotConstraint::DontCare {
                            dc += 1;
                        }
                    }
                }
            }
        }
        let rate = dc as f64 / eligible as f64;
        assert!((rate - DONT_CARE_PROB).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn cross_reference_points_backwards() {
        let bank = EntityBank::new(3);
        let mut seen = 0;
        for i in 0..500 {
            let mut r = rng::stream(3, "ref-test", i);
            let g = sample_goal(&mut r, &bank, EntityPool::Train, None);
            for (ti, t) in g.tasks.iter().enumerate() {
                for c in t.constraints.values() {
                    if let SlotConstraint::FromTask { task, slot } = c {
                        assert!(*task < ti);
                        assert!(domain_slots(&g.tasks[*task].domain).contains(&slot.as_str()));
                        seen += 1;
                    }
                }
            }
        }
        assert!(seen > 50, "cross-references too rare: {seen}");
    }
}
