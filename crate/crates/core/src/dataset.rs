use serde::{Deserialize, Serialize};

use crate::keyframe::KeyframeMatrix;

/// One processed performance of one sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignInstance {
    pub label: String,
    pub signer: String,
    pub instance: u32,
    pub keyframes: KeyframeMatrix,
}

impl SignInstance {
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.label, self.signer, self.instance)
    }
}
