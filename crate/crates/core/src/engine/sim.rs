//! Event-driven core.
//!
//! Survivors form a doubly linked list in firing order; by the no-passing
//! property this is also spatial order (front = earliest fired). Only
//! spatially adjacent survivors can meet next, so each adjacency contributes
//! at most one candidate event to a lazy min-heap. A candidate whose members
//! are not both alive when it surfaces is discarded. All live candidates
//! sharing the minimum time are popped together and grouped by exact
//! position, so triple and higher collisions annihilate as one group.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::EngineError;
use crate::scalar::Scalar;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Candidate<T> {
    time: T,
    front: u32,
    rear: u32,
}

impl<T: PartialOrd> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: PartialOrd> Eq for Candidate<T> {}

impl<T: PartialOrd> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .partial_cmp(&other.time)
            .expect("event times are comparable")
            .then(self.front.cmp(&other.front))
            .then(self.rear.cmp(&other.rear))
    }
}

/// A completed annihilation.
#[derive(Debug, Clone)]
pub struct Collision<T> {
    pub time: T,
    pub position: T,
    /// Slots (firing order, 0-based) of every member.
    pub members: Vec<u32>,
}

/// Time and position at which a rear bullet fired at `rear_fire` with speed
/// `rear_speed` reaches a front bullet, or `None` if it never does.
pub fn meeting_point<T: Scalar>(
    front_fire: &T,
    front_speed: &T,
    rear_fire: &T,
    rear_speed: &T,
) -> Option<(T, T)> {
    let t = meeting_time(front_fire, front_speed, rear_fire, rear_speed)?;
    let x = front_speed.clone() * (t.clone() - front_fire.clone());
    Some((t, x))
}

fn meeting_time<T: Scalar>(front_fire: &T, front_speed: &T, rear_fire: &T, rear_speed: &T) -> Option<T> {
    if rear_speed <= front_speed {
        return None;
    }
    let num = rear_speed.clone() * rear_fire.clone() - front_speed.clone() * front_fire.clone();
    Some(num / (rear_speed.clone() - front_speed.clone()))
}

/// Incremental simulation: bullets are fired one at a time and events are
/// resolved up to a chosen time.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    index: Vec<i64>,
    fire: Vec<T>,
    speed: Vec<T>,
    prev: Vec<u32>,
    next: Vec<u32>,
    death: Vec<u32>,
    collisions: Vec<Collision<T>>,
    heap: BinaryHeap<Reverse<Candidate<T>>>,
    rear: u32,
    resolved_to: Option<T>,
    checks: bool,
    // scratch buffers reused across batches
    batch: Vec<(u32, u32)>,
}

impl<T: Scalar> Default for Simulation<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Simulation<T> {
    pub fn new() -> Self {
        Self {
            index: Vec::new(),
            fire: Vec::new(),
            speed: Vec::new(),
            prev: Vec::new(),
            next: Vec::new(),
            death: Vec::new(),
            collisions: Vec::new(),
            heap: BinaryHeap::new(),
            rear: NONE,
            resolved_to: None,
            checks: false,
            batch: Vec::new(),
        }
    }

    /// Enables full no-passing and group-consistency assertions around every
    /// annihilation. Costs O(survivors) per event.
    pub fn with_checks(mut self, on: bool) -> Self {
        self.checks = on;
        self
    }

    /// Clears all state but keeps allocations.
    pub fn reset(&mut self) {
        self.index.clear();
        self.fire.clear();
        self.speed.clear();
        self.prev.clear();
        self.next.clear();
        self.death.clear();
        self.collisions.clear();
        self.heap.clear();
        self.rear = NONE;
        self.resolved_to = None;
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index_of(&self, slot: usize) -> i64 {
        self.index[slot]
    }

    pub fn is_alive(&self, slot: usize) -> bool {
        self.death[slot] == NONE
    }

    pub fn collision_of(&self, slot: usize) -> Option<&Collision<T>> {
        match self.death[slot] {
            NONE => None,
            g => Some(&self.collisions[g as usize]),
        }
    }

    pub fn collisions(&self) -> &[Collision<T>] {
        &self.collisions
    }

    pub fn survivor_count(&self) -> usize {
        self.death.iter().filter(|&&d| d == NONE).count()
    }

    /// Fires the next bullet. Every event up to and including `fire_time` is
    /// resolved first; the new bullet sits at the origin at that instant and
    /// cannot take part in any of them.
    pub fn fire(&mut self, index: i64, fire_time: T, speed: T) -> Result<usize, EngineError> {
        if !speed.is_positive() {
            return Err(EngineError::NonPositiveSpeed { index });
        }
        if let Some(last) = self.fire.last() {
            if fire_time <= *last {
                return Err(EngineError::FireTimesNotIncreasing { index });
            }
        }
        if let Some(done) = &self.resolved_to {
            if fire_time < *done {
                return Err(EngineError::FiredInPast { index });
            }
        }
        self.advance_to(&fire_time);

        let slot = self.index.len() as u32;
        self.index.push(index);
        self.fire.push(fire_time);
        self.speed.push(speed);
        self.prev.push(self.rear);
        self.next.push(NONE);
        self.death.push(NONE);
        if self.rear != NONE {
            self.next[self.rear as usize] = slot;
            self.push_candidate(self.rear, slot);
        }
        self.rear = slot;
        Ok(slot as usize)
    }

    fn push_candidate(&mut self, front: u32, rear: u32) {
        let (f, r) = (front as usize, rear as usize);
        if let Some(time) = meeting_time(&self.fire[f], &self.speed[f], &self.fire[r], &self.speed[r]) {
            self.heap.push(Reverse(Candidate { time, front, rear }));
        }
    }

    /// Resolves every collision with time `<= limit`.
    pub fn advance_to(&mut self, limit: &T) {
        self.resolve(Some(limit));
        match &self.resolved_to {
            Some(done) if done >= limit => {}
            _ => self.resolved_to = Some(limit.clone()),
        }
    }

    /// Resolves every remaining collision among the bullets fired so far.
    pub fn run_to_quiescence(&mut self) {
        self.resolve(None);
        if let Some(last) = self.collisions.last() {
            if self.resolved_to.as_ref().is_none_or(|done| last.time > *done) {
                self.resolved_to = Some(last.time.clone());
            }
        }
    }

    /// Time of the next pending collision, if any.
    pub fn next_event_time(&mut self) -> Option<T> {
        self.discard_stale();
        self.heap.peek().map(|c| c.0.time.clone())
    }

    fn discard_stale(&mut self) {
        while let Some(Reverse(top)) = self.heap.peek() {
            if self.death[top.front as usize] == NONE && self.death[top.rear as usize] == NONE {
                break;
            }
            self.heap.pop();
        }
    }

    fn resolve(&mut self, limit: Option<&T>) {
        loop {
            self.discard_stale();
            let time = match self.heap.peek() {
                Some(Reverse(top)) => top.time.clone(),
                None => return,
            };
            if let Some(limit) = limit {
                if time > *limit {
                    return;
                }
            }
            self.batch.clear();
            while let Some(Reverse(top)) = self.heap.peek() {
                if top.time != time {
                    break;
                }
                let Reverse(c) = self.heap.pop().expect("peeked");
                if self.death[c.front as usize] == NONE && self.death[c.rear as usize] == NONE {
                    self.batch.push((c.front, c.rear));
                }
            }
            if self.checks {
                self.check_order(&time, false);
            }
            self.annihilate_batch(time.clone());
            if self.checks {
                self.check_order(&time, true);
            }
        }
    }

    fn annihilate_batch(&mut self, time: T) {
        // Each live pair is adjacent and meets at `time`; chains of pairs at
        // the same position form one collision group.
        let mut batch = std::mem::take(&mut self.batch);
        batch.sort_unstable_by_key(|&(front, _)| front);
        let mut groups: Vec<(T, Vec<u32>)> = Vec::new();
        for &(front, rear) in &batch {
            let f = front as usize;
            let position = self.speed[f].clone() * (time.clone() - self.fire[f].clone());
            match groups.iter_mut().find(|(x, _)| *x == position) {
                Some((_, members)) => {
                    if !members.contains(&front) {
                        members.push(front);
                    }
                    members.push(rear);
                }
                None => groups.push((position, vec![front, rear])),
            }
        }
        self.batch = batch;

        let mut rear_neighbours: Vec<u32> = Vec::with_capacity(groups.len());
        for (position, mut members) in groups {
            members.sort_unstable();
            members.dedup();
            let gid = self.collisions.len() as u32;
            if self.checks {
                self.check_group(&members, &time, &position);
            }
            for &m in &members {
                self.death[m as usize] = gid;
                self.unlink(m);
            }
            let tail = *members.last().expect("group has members");
            rear_neighbours.push(tail);
            self.collisions.push(Collision {
                time: time.clone(),
                position,
                members,
            });
        }
        let mut fresh: Vec<u32> = Vec::with_capacity(rear_neighbours.len());
        for tail in rear_neighbours {
            let mut r = self.next[tail as usize];
            while r != NONE && self.death[r as usize] != NONE {
                r = self.next[r as usize];
            }
            // Two touching groups share the same rear neighbour.
            if r != NONE && !fresh.contains(&r) {
                fresh.push(r);
            }
        }
        for r in fresh {
            let f = self.prev[r as usize];
            if f != NONE {
                self.push_candidate(f, r);
            }
        }
    }

    fn unlink(&mut self, slot: u32) {
        let s = slot as usize;
        let (p, n) = (self.prev[s], self.next[s]);
        if p != NONE {
            self.next[p as usize] = n;
        }
        if n != NONE {
            self.prev[n as usize] = p;
        } else {
            self.rear = p;
        }
    }

    fn check_group(&self, members: &[u32], time: &T, position: &T) {
        assert!(members.len() >= 2, "collision group of size {}", members.len());
        assert!(position.is_positive(), "collision at non-positive position");
        for w in members.windows(2) {
            assert_eq!(self.next[w[0] as usize], w[1], "group members must be adjacent");
        }
        for &m in members {
            let m = m as usize;
            assert!(*time > self.fire[m], "collision before a member was fired");
            let x = self.speed[m].clone() * (time.clone() - self.fire[m].clone());
            assert!(x == *position, "group members disagree on position");
        }
    }

    /// Survivors ordered by position at `time`, front first. Before a batch
    /// is removed, its members may share a position; afterwards the order is
    /// strict.
    fn check_order(&self, time: &T, strict: bool) {
        if !T::EXACT {
            return;
        }
        let mut cur = self.rear;
        let mut behind: Option<T> = None;
        while cur != NONE {
            let c = cur as usize;
            if self.fire[c] <= *time {
                let x = self.speed[c].clone() * (time.clone() - self.fire[c].clone());
                if let Some(b) = &behind {
                    assert!(x >= *b, "bullet passed the one behind it");
                    assert!(!strict || x > *b, "survivors share a position");
                }
                behind = Some(x);
            }
            cur = self.prev[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn meeting_point_examples() {
        assert_eq!(
            meeting_point(&r(1, 1), &r(1, 1), &r(2, 1), &r(2, 1)),
            Some((r(3, 1), r(2, 1)))
        );
        assert_eq!(meeting_point(&r(1, 1), &r(2, 1), &r(2, 1), &r(1, 1)), None);
        assert_eq!(meeting_point(&r(1, 1), &r(1, 1), &r(2, 1), &r(1, 1)), None);
        assert_eq!(
            meeting_point(&r(2, 1), &r(1, 1), &r(5, 1), &r(3, 2)),
            Some((r(11, 1), r(9, 1)))
        );
    }

    #[test]
    fn rejects_out_of_order_firing() {
        let mut sim = Simulation::<Rational>::new();
        sim.fire(1, r(2, 1), r(1, 1)).unwrap();
        assert!(matches!(
            sim.fire(2, r(2, 1), r(1, 1)),
            Err(EngineError::FireTimesNotIncreasing { index: 2 })
        ));
        assert!(matches!(
            sim.fire(3, r(3, 1), r(0, 1)),
            Err(EngineError::NonPositiveSpeed { index: 3 })
        ));
    }

    #[test]
    fn triple_collision_is_one_group() {
        let mut sim = Simulation::<Rational>::new().with_checks(true);
        sim.fire(1, r(1, 1), r(1, 1)).unwrap();
        sim.fire(2, r(2, 1), r(3, 2)).unwrap();
        sim.fire(3, r(3, 1), r(3, 1)).unwrap();
        sim.advance_to(&r(10, 1));
        assert_eq!(sim.collisions().len(), 1);
        let c = &sim.collisions()[0];
        assert_eq!((c.time, c.position), (r(4, 1), r(3, 1)));
        assert_eq!(c.members, vec![0, 1, 2]);
    }

    #[test]
    fn collision_at_a_firing_instant_is_resolved_first() {
        // b2 catches b1 at t = 3 exactly when b3 is fired; b3 must see an
        // empty field ahead of it.
        let mut sim = Simulation::<Rational>::new().with_checks(true);
        sim.fire(1, r(1, 1), r(1, 1)).unwrap();
        sim.fire(2, r(2, 1), r(2, 1)).unwrap();
        sim.fire(3, r(3, 1), r(5, 1)).unwrap();
        sim.run_to_quiescence();
        assert!(!sim.is_alive(0) && !sim.is_alive(1) && sim.is_alive(2));
        assert_eq!(sim.collisions().len(), 1);
    }

    #[test]
    fn reset_keeps_nothing() {
        let mut sim = Simulation::<f64>::new();
        sim.fire(1, 1.0, 0.5).unwrap();
        sim.fire(2, 2.0, 0.9).unwrap();
        sim.run_to_quiescence();
        sim.reset();
        assert!(sim.is_empty());
        sim.fire(1, 1.0, 0.5).unwrap();
        assert_eq!(sim.survivor_count(), 1);
    }
}
