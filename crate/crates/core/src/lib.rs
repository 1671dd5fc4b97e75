pub mod cli;
pub mod conformance;
pub mod curate;
pub mod dicom;
pub mod identity;
pub mod insertion;
pub mod instance;
pub mod keyset;
pub mod phantom;
pub mod pixel;
pub mod reports;
pub mod seeding;
pub mod tokenize;
pub mod validator;
