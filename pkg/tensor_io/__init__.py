from .tensor_io import (
    load_cp_model,
    load_pls_model,
    load_tensor_pls_model,
    load_tucker_model,
    read_corpus_manifest,
    read_manifest,
    read_tensor,
    save_averaged_block_model,
    save_block_model,
    save_cp_model,
    save_linked_model,
    save_pls_model,
    save_tensor_pls_model,
    save_tucker_model,
    write_corpus_manifest,
    write_manifest,
    write_tensor,
)

__all__ = [
    'write_tensor',
    'read_tensor',
    'write_manifest',
    'read_manifest',
    'save_tucker_model',
    'load_tucker_model',
    'save_cp_model',
    'load_cp_model',
    'save_block_model',
    'save_averaged_block_model',
    'save_linked_model',
    'save_pls_model',
    'load_pls_model',
    'save_tensor_pls_model',
    'load_tensor_pls_model',
    'read_corpus_manifest',
    'write_corpus_manifest',
]
