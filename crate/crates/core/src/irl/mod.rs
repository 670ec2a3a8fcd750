//! Maximum-entropy inverse reinforcement learning on the grid MDP.

mod objective;
mod planning;
mod reward;
mod train;

pub use objective::{expert_visitation, irl_loss_and_grad, Demonstration, IrlObjective};
pub use planning::{
    expected_visitation, soft_value_iteration, PolicySchedule, SoftValues, VisitationField,
};
pub use reward::{reward_backward, reward_forward, RewardField, RewardMapParams, RewardMode};
pub use train::{
    evaluate_sequential, problem_loss_and_grad, train_irl, train_irl_with, IrlConfig, IrlProblem,
    Optimizer, TrainDiagnostics,
};
