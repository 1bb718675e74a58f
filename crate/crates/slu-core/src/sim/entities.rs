//! Entity banks and the synthetic backend inventory.
//!
//! Names are generated from fixed word lists; per-restaurant attributes are
//! drawn from a seeded stream so a corpus seed pins the whole inventory.
//! The last 20% of every name list is held out of the training pool so that
//! dev/test dialogues contain out-of-vocabulary entities.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng;

pub const CATEGORIES: [&str; 10] = [
    "italian", "chinese", "mexican", "indian", "thai", "brazilian", "french", "japanese", "greek",
    "korean",
];

pub const LOCATIONS: [&str; 8] = [
    "mountain view",
    "palo alto",
    "san jose",
    "sunnyvale",
    "cupertino",
    "santa clara",
    "redwood city",
    "menlo park",
];

pub const PRICE_RANGES: [&str; 4] = ["cheap", "moderate", "expensive", "upscale"];
pub const RATINGS: [&str; 3] = ["3 star", "4 star", "5 star"];
pub const MEALS: [&str; 4] = ["breakfast", "lunch", "dinner", "brunch"];

pub const DATES: [&str; 12] = [
    "today",
    "tomorrow",
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
    "march 25",
    "april 2",
    "june 14",
];

pub const TIMES: [&str; 10] = [
    "5 pm",
    "6 pm",
    "7 pm",
    "8 pm",
    "noon",
    "5 : 30 pm",
    "6 : 00 pm",
    "7 : 15 pm",
    "8 : 45 pm",
    "9 pm",
];

pub const NUMBERS: [&str; 8] = ["2", "3", "4", "5", "6", "7", "8", "9"];

const REST_FIRST: [&str; 20] = [
    "golden", "jade", "blue", "royal", "rustic", "little", "grand", "olive", "spicy", "sunny",
    "silver", "urban", "cozy", "wild", "green", "lucky", "crimson", "velvet", "amber", "noble",
];
const REST_SECOND: [&str; 10] = [
    "dragon", "garden", "table", "fork", "kitchen", "bistro", "grill", "terrace", "spoon",
    "harvest",
];

const MOVIE_FIRST: [&str; 10] = [
    "midnight", "crimson", "silent", "golden", "shadow", "iron", "emerald", "last", "lost",
    "rising",
];
const MOVIE_SECOND: [&str; 10] = [
    "empire", "voyage", "legacy", "kingdom", "horizon", "echo", "symphony", "odyssey", "frontier",
    "reckoning",
];

const THEATRE_FIRST: [&str; 6] = ["amc", "cinelux", "regal", "cinemark", "century", "showplace"];
const THEATRE_SECOND: [&str; 5] = ["plaza", "downtown", "newpark", "oakridge", "grand"];

/// Which entity pool a dialogue samples from. Training dialogues see only
/// the first 80% of each name list; dev/test see everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityPool {
    Train,
    Full,
}

#[derive(Debug, Clone)]
pub struct Restaurant {
    pub name: String,
    pub category: String,
    pub location: String,
    pub price_range: String,
    pub rating: String,
    pub meal: String,
}

/// Seeded inventory: 200 restaurants, 100 movies, 30 theatres.
pub struct EntityBank {
    pub restaurants: Vec<Restaurant>,
    pub movies: Vec<String>,
    pub theatres: Vec<String>,
}

impl EntityBank {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng::labeled(seed, "entities");
        let mut restaurants = Vec::with_capacity(200);
        for first in REST_FIRST {
            for second in REST_SECOND {
                restaurants.push(Restaurant {
                    name: format!("{first} {second}"),
                    category: CATEGORIES.choose(&mut rng).unwrap().to_string(),
                    location: LOCATIONS.choose(&mut rng).unwrap().to_string(),
                    price_range: PRICE_RANGES.choose(&mut rng).unwrap().to_string(),
                    rating: RATINGS.choose(&mut rng).unwrap().to_string(),
                    meal: MEALS.choose(&mut rng).unwrap().to_string(),
                });
            }
        }
        let movies = MOVIE_FIRST
            .iter()
            .flat_map(|f| MOVIE_SECOND.iter().map(move |s| format!("{f} {s}")))
            .collect();
        let theatres = THEATRE_FIRST
            .iter()
            .flat_map(|f| THEATRE_SECOND.iter().map(move |s| format!("{f} {s}")))
            .collect();
        EntityBank {
            restaurants,
            movies,
            theatres,
        }
    }

    fn pool_len(total: usize, pool: EntityPool) -> usize {
        match pool {
            EntityPool::Train => total * 4 / 5,
            EntityPool::Full => total,
        }
    }

    pub fn sample_restaurant(&self, rng: &mut impl Rng, pool: EntityPool) -> &Restaurant {
        let n = Self::pool_len(self.restaurants.len(), pool);
        &self.restaurants[rng.gen_range(0..n)]
    }

    pub fn sample_movie(&self, rng: &mut impl Rng, pool: EntityPool) -> &str {
        let n = Self::pool_len(self.movies.len(), pool);
        &self.movies[rng.gen_range(0..n)]
    }

    pub fn sample_theatre(&self, rng: &mut impl Rng, pool: EntityPool) -> &str {
        let n = Self::pool_len(self.theatres.len(), pool);
        &self.theatres[rng.gen_range(0..n)]
    }

    /// Restaurants visible to a pool that match the given hard constraints.
    pub fn find_restaurants(
        &self,
        pool: EntityPool,
        category: Option<&str>,
        location: Option<&str>,
        price_range: Option<&str>,
    ) -> Vec<&Restaurant> {
        let n = Self::pool_len(self.restaurants.len(), pool);
        self.restaurants[..n]
            .iter()
            .filter(|r| {
                category.is_none_or(|c| r.category == c)
                    && location.is_none_or(|l| r.location == l)
                    && price_range.is_none_or(|p| r.price_range == p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bank_sizes() {
        let b = EntityBank::new(7);
        assert_eq!(b.restaurants.len(), 200);
        assert_eq!(b.movies.len(), 100);
        assert_eq!(b.theatres.len(), 30);
    }

    #[test]
    fn train_pool_excludes_holdout() {
        let b = EntityBank::new(7);
        let holdout: Vec<&str> = b.movies[80..].iter().map(|s| s.as_str()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let m = b.sample_movie(&mut rng, EntityPool::Train);
            assert!(!holdout.contains(&m));
        }
    }

    #[test]
    fn bank_is_seed_deterministic() {
        let a = EntityBank::new(9);
        let b = EntityBank::new(9);
        for (x, y) in a.restaurants.iter().zip(b.restaurants.iter()) {
            assert_eq!(x.category, y.category);
            assert_eq!(x.location, y.location);
        }
    }
}
