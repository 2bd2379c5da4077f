//! Field abstractions: scalar fields and mean-flow fields over the plane.

use std::sync::Arc;

use crate::geometry::Point2;
use crate::scalar::Real;

pub trait ScalarField<T: Real>: Send + Sync {
    fn value(&self, p: Point2<T>) -> T;
}

impl<T: Real, F> ScalarField<T> for F
where
    F: Fn(Point2<T>) -> T + Send + Sync,
{
    fn value(&self, p: Point2<T>) -> T {
        self(p)
    }
}

/// Time-averaged velocity plus turbulent intensity.
pub trait FlowField<T: Real>: Send + Sync {
    fn mean_velocity(&self, p: Point2<T>) -> (T, T);
    fn intensity(&self, p: Point2<T>) -> T;
}

/// Which scalar property of a flow field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    U,
    V,
    Intensity,
}

impl Property {
    pub const ALL: [Property; 3] = [Property::U, Property::V, Property::Intensity];

    pub fn name(self) -> &'static str {
        match self {
            Property::U => "u",
            Property::V => "v",
            Property::Intensity => "i",
        }
    }
}

/// Projects one property out of a flow field.
pub struct Component<T: Real> {
    flow: Arc<dyn FlowField<T>>,
    property: Property,
}

impl<T: Real> Component<T> {
    pub fn new(flow: Arc<dyn FlowField<T>>, property: Property) -> Self {
        Self { flow, property }
    }
}

impl<T: Real> ScalarField<T> for Component<T> {
    fn value(&self, p: Point2<T>) -> T {
        match self.property {
            Property::U => self.flow.mean_velocity(p).0,
            Property::V => self.flow.mean_velocity(p).1,
            Property::Intensity => self.flow.intensity(p),
        }
    }
}

pub fn component<T: Real>(flow: &Arc<dyn FlowField<T>>, property: Property) -> Arc<dyn ScalarField<T>> {
    Arc::new(Component::new(flow.clone(), property))
}
