use crate::prov::{ActivityStatus, ProvError, ProvRecorder, ValueDescriptor};

/// Callbacks the executor issues around every node it runs.
///
/// Implementations must tolerate interleaved calls from concurrently
/// executing branches.
pub trait TaskHooks: Send + Sync {
    fn register_source(&self, descriptor: &ValueDescriptor) -> Result<String, ProvError>;

    fn begin_task(
        &self,
        node_id: &str,
        process_id: &str,
        scope_path: &[String],
        input_entity_ids: &[String],
    ) -> Result<String, ProvError>;

    fn end_task(
        &self,
        activity_id: &str,
        status: ActivityStatus,
        outputs: &[ValueDescriptor],
    ) -> Result<Vec<String>, ProvError>;
}

impl TaskHooks for ProvRecorder {
    fn register_source(&self, descriptor: &ValueDescriptor) -> Result<String, ProvError> {
        self.register_source_entity(descriptor)
    }

    fn begin_task(
        &self,
        node_id: &str,
        process_id: &str,
        scope_path: &[String],
        input_entity_ids: &[String],
    ) -> Result<String, ProvError> {
        ProvRecorder::begin_task(self, node_id, process_id, scope_path, input_entity_ids)
    }

    fn end_task(
        &self,
        activity_id: &str,
        status: ActivityStatus,
        outputs: &[ValueDescriptor],
    ) -> Result<Vec<String>, ProvError> {
        ProvRecorder::end_task(self, activity_id, status, outputs)
    }
}

/// Records nothing. Child graphs run under this.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHooks;

impl TaskHooks for NoHooks {
    fn register_source(&self, _: &ValueDescriptor) -> Result<String, ProvError> {
        Ok(String::new())
    }

    fn begin_task(&self, _: &str, _: &str, _: &[String], _: &[String]) -> Result<String, ProvError> {
        Ok(String::new())
    }

    fn end_task(&self, _: &str, _: ActivityStatus, outputs: &[ValueDescriptor]) -> Result<Vec<String>, ProvError> {
        Ok(vec![String::new(); outputs.len()])
    }
}
