use super::{compare_difficulty, compare_slot_strength, compare_technician_strength};
use super::{EntitySort, HeuristicConfig, ValueSort};
use crate::model::Instance;
use crate::schedule::Placement;

/// Entity queue and value order for one construction run.
///
/// Values are `(technician, start)` pairs ordered lexicographically by the
/// technician key, then the slot key. Both keys follow the configured value
/// sort; ties keep input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateOrder {
    pub entities: Vec<usize>,
    pub technicians: Vec<usize>,
    pub slots: Vec<u32>,
}

impl CandidateOrder {
    /// Orders `tasks` (indices into the instance) and all values.
    pub fn new(instance: &Instance, tasks: &[usize], config: &HeuristicConfig) -> Self {
        let mut entities = tasks.to_vec();
        if config.entity_sort == EntitySort::DecreasingDifficulty {
            // stable: equally difficult tasks keep their order
            entities.sort_by(|&a, &b| compare_difficulty(instance.task(b), instance.task(a)));
        }
        let (technicians, slots) = Self::values(instance, config.value_sort);
        CandidateOrder {
            entities,
            technicians,
            slots,
        }
    }

    fn values(instance: &Instance, sort: ValueSort) -> (Vec<usize>, Vec<u32>) {
        let grid = instance.grid();
        let mut technicians: Vec<usize> = (0..instance.technicians().len()).collect();
        let mut slots: Vec<u32> = (0..grid.total_slots()).collect();
        let tech = |i: usize| instance.technician(i);
        match sort {
            ValueSort::None => {}
            ValueSort::DecreasingStrength => {
                technicians.sort_by(|&a, &b| compare_technician_strength(tech(b), tech(a)));
                slots.sort_by(|&a, &b| compare_slot_strength(grid, b, a));
            }
            ValueSort::IncreasingStrength => {
                technicians.sort_by(|&a, &b| compare_technician_strength(tech(a), tech(b)));
                slots.sort_by(|&a, &b| compare_slot_strength(grid, a, b));
            }
        }
        (technicians, slots)
    }

    pub fn pair_count(&self) -> usize {
        self.technicians.len() * self.slots.len()
    }

    /// Value pairs in iteration order.
    pub fn pairs(&self) -> impl Iterator<Item = Placement> + '_ {
        self.technicians
            .iter()
            .flat_map(move |&t| self.slots.iter().map(move |&s| Placement::new(t, s)))
    }
}
