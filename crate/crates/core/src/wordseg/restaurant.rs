//! Pitman-Yor Chinese restaurants with explicit table counts.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{AudError, Result};

pub type WordId = u32;

#[derive(Debug, Clone, Default, PartialEq)]
struct Dish {
    /// Customers at each table serving this dish.
    tables: Vec<u32>,
    customers: u64,
}

/// One Pitman-Yor restaurant: a seating arrangement of customers (word
/// tokens) at tables, each table serving one dish (word type).
#[derive(Debug, Clone, PartialEq)]
pub struct PYRestaurant {
    discount: f64,
    strength: f64,
    dishes: HashMap<WordId, Dish>,
    customers: u64,
    tables: u64,
}

impl PYRestaurant {
    pub fn new(discount: f64, strength: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) || !(strength > -discount) {
            return Err(AudError::Domain(format!(
                "Pitman-Yor parameters need 0 <= d < 1 and theta > -d, got d={discount}, theta={strength}"
            )));
        }
        Ok(Self { discount, strength, dishes: HashMap::new(), customers: 0, tables: 0 })
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn customers(&self) -> u64 {
        self.customers
    }

    pub fn tables(&self) -> u64 {
        self.tables
    }

    pub fn is_empty(&self) -> bool {
        self.customers == 0
    }

    pub fn customers_of(&self, w: WordId) -> u64 {
        self.dishes.get(&w).map_or(0, |d| d.customers)
    }

    pub fn tables_of(&self, w: WordId) -> u64 {
        self.dishes.get(&w).map_or(0, |d| d.tables.len() as u64)
    }

    /// `(c_w - d t_w) / (θ + c) + (θ + d t) / (θ + c) · base_p`.
    pub fn predictive(&self, w: WordId, base_p: f64) -> f64 {
        if self.customers == 0 {
            return base_p;
        }
        let denom = self.strength + self.customers as f64;
        let new_table = self.predictive_unseen(base_p);
        match self.dishes.get(&w) {
            Some(d) => (d.customers as f64 - self.discount * d.tables.len() as f64) / denom + new_table,
            None => new_table,
        }
    }

    /// Predictive probability of a dish with no customers here.
    pub fn predictive_unseen(&self, base_p: f64) -> f64 {
        if self.customers == 0 {
            return base_p;
        }
        (self.strength + self.discount * self.tables as f64) / (self.strength + self.customers as f64) * base_p
    }

    /// Seat a customer of dish `w`. Returns true when a new table was
    /// opened, in which case the parent level gains a customer.
    pub fn add_customer<R: Rng>(&mut self, w: WordId, base_p: f64, rng: &mut R) -> bool {
        let new_weight = (self.strength + self.discount * self.tables as f64) * base_p;
        let dish = self.dishes.entry(w).or_default();
        let existing = dish.customers as f64 - self.discount * dish.tables.len() as f64;
        let mut opened = true;
        // The first customer of a dish always opens a table. Skipping the
        // draw also matters for θ < 0, where the new-table weight of an
        // empty restaurant is negative.
        if !dish.tables.is_empty() {
            let mut u = rng.random::<f64>() * (existing + new_weight);
            if u < existing {
                for t in dish.tables.iter_mut() {
                    u -= *t as f64 - self.discount;
                    if u < 0.0 {
                        *t += 1;
                        opened = false;
                        break;
                    }
                }
                if opened {
                    // Rounding left `u` just above the last table's share.
                    *dish.tables.last_mut().expect("checked non-empty") += 1;
                    opened = false;
                }
            }
        }
        if opened {
            dish.tables.push(1);
            self.tables += 1;
        }
        dish.customers += 1;
        self.customers += 1;
        opened
    }

    /// Remove a customer of dish `w`, choosing the table in proportion to
    /// its occupancy. Returns true when the table became empty, in which
    /// case the parent level loses a customer.
    pub fn remove_customer<R: Rng>(&mut self, w: WordId, rng: &mut R) -> Result<bool> {
        let dish = self
            .dishes
            .get_mut(&w)
            .ok_or_else(|| AudError::InternalState(format!("no customer of word {w} to remove")))?;
        let mut u = rng.random_range(0..dish.customers);
        let mut idx = 0;
        for (i, t) in dish.tables.iter().enumerate() {
            if u < *t as u64 {
                idx = i;
                break;
            }
            u -= *t as u64;
        }
        dish.tables[idx] -= 1;
        dish.customers -= 1;
        self.customers -= 1;
        let closed = dish.tables[idx] == 0;
        if closed {
            dish.tables.swap_remove(idx);
            self.tables -= 1;
        }
        if dish.customers == 0 {
            self.dishes.remove(&w);
        }
        Ok(closed)
    }

    /// Customer counts per dish, for audits.
    pub fn customer_counts(&self) -> HashMap<WordId, u64> {
        self.dishes.iter().map(|(w, d)| (*w, d.customers)).collect()
    }

    /// Table counts per dish, for audits.
    pub fn table_counts(&self) -> HashMap<WordId, u64> {
        self.dishes.iter().map(|(w, d)| (*w, d.tables.len() as u64)).collect()
    }

    /// Totals agree with the tables and every table is occupied.
    pub fn check(&self) -> Result<()> {
        let (mut customers, mut tables) = (0u64, 0u64);
        for (w, d) in &self.dishes {
            if d.tables.is_empty() || d.tables.contains(&0) {
                return Err(AudError::InternalState(format!("word {w} has an empty table or no tables")));
            }
            let sum: u64 = d.tables.iter().map(|t| *t as u64).sum();
            if sum != d.customers {
                return Err(AudError::InternalState(format!(
                    "word {w}: tables seat {sum} customers but {} are recorded",
                    d.customers
                )));
            }
            customers += sum;
            tables += d.tables.len() as u64;
        }
        if customers != self.customers || tables != self.tables {
            return Err(AudError::InternalState(format!(
                "restaurant totals ({}, {}) differ from the tables ({customers}, {tables})",
                self.customers, self.tables
            )));
        }
        Ok(())
    }
}

/// Predictive probability of `w` in `r` with base probability `base_p`.
pub fn crp_predictive(r: &PYRestaurant, w: WordId, base_p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&base_p) {
        return Err(AudError::Domain(format!("base probability {base_p} outside [0, 1]")));
    }
    r.check()?;
    Ok(r.predictive(w, base_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;

    #[test]
    fn negative_and_zero_strength_seat_and_normalize() {
        let mut rng = stream_rng(4, 4, 0);
        for theta in [-0.2, 0.0] {
            let mut r = PYRestaurant::new(0.3, theta).unwrap();
            assert_eq!(r.predictive(0, 0.5), 0.5);
            for i in 0..30 {
                assert!(r.add_customer(i % 2, 0.5, &mut rng) || i > 1);
                let total = r.predictive(0, 0.5) + r.predictive(1, 0.5);
                assert!((total - 1.0).abs() < 1e-12, "theta {theta}: {total}");
            }
            r.check().unwrap();
        }
    }

    #[test]
    fn empty_restaurant_returns_base() {
        let r = PYRestaurant::new(0.5, 1.0).unwrap();
        assert_eq!(crp_predictive(&r, 3, 0.125).unwrap(), 0.125);
    }

    #[test]
    fn one_customer_by_hand() {
        let mut r = PYRestaurant::new(0.5, 1.0).unwrap();
        let mut rng = stream_rng(0, 0, 0);
        assert!(r.add_customer(7, 0.2, &mut rng));
        let base = 0.2;
        let p = r.predictive(7, base);
        assert!((p - (0.25 + 0.75 * base)).abs() < 1e-15);
        assert!((r.predictive(8, base) - 0.75 * base).abs() < 1e-15);
    }

    #[test]
    fn predictive_normalizes_over_a_finite_vocabulary() {
        let base = [0.5, 0.3, 0.2];
        let mut r = PYRestaurant::new(0.3, 2.0).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        for (i, w) in [0u32, 1, 0, 2, 0, 1, 1, 0].iter().enumerate() {
            r.add_customer(*w, base[*w as usize], &mut rng);
            let total: f64 = (0..3).map(|v| r.predictive(v, base[v as usize])).sum();
            assert!((total - 1.0).abs() < 1e-12, "after {i}: {total}");
        }
        r.check().unwrap();
    }

    #[test]
    fn add_then_remove_restores_counts() {
        let mut r = PYRestaurant::new(0.5, 1.0).unwrap();
        let mut rng = stream_rng(2, 0, 0);
        for w in [1u32, 1, 2, 1, 3, 2] {
            r.add_customer(w, 0.1, &mut rng);
        }
        let before = r.customer_counts();
        r.add_customer(2, 0.1, &mut rng);
        r.remove_customer(2, &mut rng).unwrap();
        assert_eq!(r.customer_counts(), before);
        r.check().unwrap();
        for w in [1u32, 1, 2, 1, 3, 2] {
            r.remove_customer(w, &mut rng).unwrap();
        }
        assert!(r.is_empty());
        assert_eq!(r.tables(), 0);
        assert!(r.remove_customer(1, &mut rng).is_err());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(PYRestaurant::new(1.0, 1.0).is_err());
        assert!(PYRestaurant::new(0.5, -0.6).is_err());
        assert!(PYRestaurant::new(0.0, 0.5).is_ok());
    }
}
