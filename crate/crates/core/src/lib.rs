pub mod devices;
pub mod intent;
pub mod langmodel;
pub mod paradigm;
pub mod signal;
pub mod tdca;
