//! Fixed names used by compiled rules and the runtime.

/// Class-membership predicate.
pub const A: &str = "a";

pub const DEONTIC_RELATION: &str = "DeonticRelation";
pub const TIME_EVENT: &str = "TimeEvent";
pub const INSTANT: &str = "Instant";
pub const EVENT: &str = "Event";
pub const NORM_ENACTMENT: &str = "NormEnactment";

pub const IS_GENERATED: &str = "isGenerated";
pub const ACTIVATED: &str = "activated";
pub const DEBTOR: &str = "debtor";
pub const END: &str = "end";
pub const AT_TIME: &str = "atTime";
pub const IN_XSD_DATE_TIME_STAMP: &str = "inXSDDateTimeStamp";
pub const FULFILLS: &str = "fulfills";
pub const VIOLATES: &str = "violates";
pub const FULFILLED: &str = "fulfilled";
pub const VIOLATED: &str = "violated";
pub const EXCEPTION_TO_NORM: &str = "exceptionToNorm";
pub const EXCEPTION_TO_DR: &str = "exceptionToDR";
/// Dr-wide suspension asserted by exceptions triggered by an unrelated event;
/// declared a subproperty of `exceptionToDR` in the prelude.
pub const EXCEPTION_TO_WHOLE_DR: &str = "exceptionToWholeDR";
pub const EXCEPTION_TO_EXCEPTION: &str = "exceptionToException";
pub const ACTOR: &str = "actor";
pub const HAPPENED: &str = "happened";
/// Norm enactment instant, recorded when a rule set is loaded.
pub const ENACTED_AT: &str = "enactedAt";
/// Activation instant of a deontic relation.
pub const ACTIVATED_AT: &str = "activatedAt";

pub const RESERVED_CLASSES: &[&str] = &[DEONTIC_RELATION, TIME_EVENT, INSTANT, EVENT, NORM_ENACTMENT];

pub const RESERVED_PROPERTIES: &[&str] = &[
    IS_GENERATED,
    ACTIVATED,
    DEBTOR,
    END,
    AT_TIME,
    IN_XSD_DATE_TIME_STAMP,
    FULFILLS,
    VIOLATES,
    FULFILLED,
    VIOLATED,
    EXCEPTION_TO_NORM,
    EXCEPTION_TO_DR,
    EXCEPTION_TO_WHOLE_DR,
    EXCEPTION_TO_EXCEPTION,
    ACTOR,
    HAPPENED,
    ENACTED_AT,
    ACTIVATED_AT,
];

/// Predicates that only the norm machinery may write. User facts in the
/// state partition may not use them.
pub const LIFECYCLE_PROPERTIES: &[&str] = &[
    IS_GENERATED,
    ACTIVATED,
    DEBTOR,
    END,
    FULFILLS,
    VIOLATES,
    FULFILLED,
    VIOLATED,
    EXCEPTION_TO_NORM,
    EXCEPTION_TO_DR,
    EXCEPTION_TO_WHOLE_DR,
    EXCEPTION_TO_EXCEPTION,
    HAPPENED,
    ENACTED_AT,
    ACTIVATED_AT,
];

pub fn is_reserved_class(name: &str) -> bool {
    RESERVED_CLASSES.contains(&name)
}

pub fn is_reserved_property(name: &str) -> bool {
    RESERVED_PROPERTIES.contains(&name)
}

pub fn is_lifecycle_property(name: &str) -> bool {
    LIFECYCLE_PROPERTIES.contains(&name)
}

/// The shipped prelude ontology, in the triple file format.
pub const PRELUDE: &str = include_str!("prelude.nt");
