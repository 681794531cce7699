#include "l2h/errors.hpp"

namespace l2h {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_file: return "MissingFile";
    case ErrorCode::schema_error: return "SchemaError";
    case ErrorCode::out_of_bounds_point: return "OutOfBoundsPoint";
    case ErrorCode::invalid_sigma: return "InvalidSigma";
    case ErrorCode::infeasible_packing: return "InfeasiblePacking";
    case ErrorCode::negative_shift: return "NegativeShift";
    case ErrorCode::shape_error: return "ShapeError";
    case ErrorCode::non_integer_factor: return "NonIntegerFactor";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::dim_mismatch: return "DimMismatch";
    case ErrorCode::unknown_strategy: return "UnknownStrategy";
    case ErrorCode::bad_dims: return "BadDims";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::crop_too_large: return "CropTooLarge";
    case ErrorCode::diverged_training: return "DivergedTraining";
    case ErrorCode::empty_eval_set: return "EmptyEvalSet";
    case ErrorCode::model_not_loaded: return "ModelNotLoaded";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace l2h
