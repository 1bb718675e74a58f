//! Dialogue acts exchanged between the simulated user and the system policy.

/// Acts produced by the user model. Slot-parameterized acts carry the slot
/// name; informs additionally carry the surface value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UserAct {
    Greeting,
    /// Announces a new task; the act itself names the task intent.
    TaskIntent { domain: String },
    /// One or more slot/value pairs volunteered or given in answer.
    Inform(Vec<(String, String)>),
    /// "any time is fine" — the user has no preference for this slot.
    DontCare(String),
    Affirm,
    /// Affirmation that echoes an offered value ("5 pm sounds good").
    AffirmSlot(String, String),
    Deny,
    /// Rejection aimed at one offered slot, without echoing a value.
    DenySlot(String),
    RequestAlts,
    ThankYou,
    GoodBye,
    CantUnderstand,
    /// Out-of-domain request the system cannot serve.
    UnknownIntent,
}

impl UserAct {
    /// Intent label contributed by this act, if any. Inform acts are only
    /// labeled `contextual` when they stand alone; informs folded into a
    /// task announcement are covered by the task-intent label.
    pub fn intent_label(&self, standalone_inform: bool) -> Option<String> {
        match self {
            UserAct::Greeting => Some("greeting".into()),
            UserAct::TaskIntent { domain } => Some(domain.clone()),
            UserAct::Inform(_) => standalone_inform.then(|| "contextual".to_string()),
            UserAct::DontCare(slot) => Some(format!("dont_care({slot})")),
            UserAct::Affirm => Some("affirm".into()),
            UserAct::AffirmSlot(slot, _) => Some(format!("affirm({slot})")),
            UserAct::Deny => Some("deny".into()),
            UserAct::DenySlot(slot) => Some(format!("deny({slot})")),
            UserAct::RequestAlts => Some("request_alts".into()),
            UserAct::ThankYou => Some("thank_you".into()),
            UserAct::GoodBye => Some("good_bye".into()),
            UserAct::CantUnderstand => Some("cant_understand".into()),
            UserAct::UnknownIntent => Some("unknown_intent".into()),
        }
    }
}

/// Acts produced by the rule-based system policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SysAct {
    Greeting,
    /// Ask the user for one slot.
    Request(String),
    /// Propose a concrete candidate; slots list what the surface form mentions.
    Offer {
        domain: String,
        slots: Vec<(String, String)>,
    },
    /// Backend returned nothing for the current constraints.
    NoAvailability,
    /// Close out the current task.
    Confirm { domain: String },
    DidntUnderstand,
    GoodBye,
}
